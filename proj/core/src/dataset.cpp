#include "gite/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gite/error.hpp"

namespace gite::data {

Part parse_part(const std::string& text) {
  if (text == "train") return Part::train;
  if (text == "val") return Part::val;
  if (text == "test") return Part::test;
  if (text == "all") return Part::all;
  throw ConfigError("split must be train, val, test or all, got '" + text + "'");
}

std::string to_string(Part part) {
  switch (part) {
    case Part::train: return "train";
    case Part::val: return "val";
    case Part::test: return "test";
    case Part::all: return "all";
  }
  return "all";
}

std::vector<std::size_t> Dataset::indices(Part part) const {
  switch (part) {
    case Part::train: return split.train;
    case Part::val: return split.val;
    case Part::test: return split.test;
    case Part::all: break;
  }
  std::vector<std::size_t> all(num_nodes());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

void Dataset::validate() const {
  const std::size_t n = num_nodes();
  if (graph.num_nodes() != n) {
    throw IngestError("dataset: graph has " + std::to_string(graph.num_nodes()) +
                      " nodes but covariates have " + std::to_string(n) + " rows");
  }
  auto check_column = [n](const ag::Tensor& t, const char* what) {
    if (t.rows() != n || t.cols() != 1) {
      throw IngestError(std::string("dataset: ") + what + " must be [" + std::to_string(n) +
                        ", 1], got " + shape_string(t));
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(t[i])) {
        throw IngestError(std::string("dataset: ") + what + " of node " + std::to_string(i) +
                          " is not finite");
      }
  };
  check_column(treatments, "treatments");
  check_column(outcomes, "outcomes");
  if (tau) check_column(*tau, "tau");
  for (std::size_t i = 0; i < n; ++i) {
    if (treatments[i] != 0.0 && treatments[i] != 1.0) {
      throw IngestError("dataset: treatment of node " + std::to_string(i) + " is not 0 or 1");
    }
    for (std::size_t j = 0; j < covariates.cols(); ++j)
      if (!std::isfinite(covariates(i, j))) {
        throw IngestError("dataset: covariate " + std::to_string(j) + " of node " +
                          std::to_string(i) + " is not finite");
      }
  }
  std::vector<char> seen(n, 0);
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (std::size_t i : *part) {
      if (i >= n || seen[i]) throw IngestError("dataset: split is not a partition of the nodes");
      seen[i] = 1;
    }
  const std::size_t covered = split.train.size() + split.val.size() + split.test.size();
  if (covered != 0 && covered != n) {
    throw IngestError("dataset: split covers " + std::to_string(covered) + " of " +
                      std::to_string(n) + " nodes");
  }
}

Split make_split(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw ConfigError("split: need at least 10 nodes, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  const std::size_t n_train = n * 70 / 100;
  const std::size_t n_val = n * 15 / 100;
  Split s;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

ZScore ZScore::fit(const ag::Tensor& y, const std::vector<std::size_t>& rows) {
  ZScore z;
  z.enabled = true;
  if (rows.empty()) return z;
  double sum = 0.0;
  for (std::size_t i : rows) sum += y[i];
  z.mean = sum / static_cast<double>(rows.size());
  double ss = 0.0;
  for (std::size_t i : rows) ss += (y[i] - z.mean) * (y[i] - z.mean);
  const double sd = std::sqrt(ss / static_cast<double>(rows.size()));
  z.scale = sd > 0.0 ? sd : 1.0;
  return z;
}

ag::Tensor ZScore::apply(const ag::Tensor& y) const {
  if (!enabled) return y;
  ag::Tensor out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - mean) / scale;
  return out;
}

ag::Tensor ZScore::invert(const ag::Tensor& y) const {
  if (!enabled) return y;
  ag::Tensor out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * scale + mean;
  return out;
}

ag::Tensor ZScore::invert_effect(const ag::Tensor& effect) const {
  if (!enabled) return effect;
  ag::Tensor out(effect.rows(), effect.cols());
  for (std::size_t i = 0; i < effect.size(); ++i) out[i] = effect[i] * scale;
  return out;
}

}  // namespace gite::data

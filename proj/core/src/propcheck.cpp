#include "gite/metrics/propcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "gite/ag/accurate_sum.hpp"
#include "gite/config/key_value.hpp"
#include "gite/error.hpp"
#include "gite/layers/nim.hpp"

namespace gite::metrics {

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::mean: return "mean";
    case Aggregator::gcn: return "gcn";
    case Aggregator::gat: return "gat";
    case Aggregator::max_pool: return "max_pool";
    case Aggregator::nim_plain: return "nim_pi_eta_0";
    case Aggregator::nim_amplified: return "nim_pi_eta_1";
  }
  return "?";
}

const std::vector<Aggregator>& all_aggregators() {
  static const std::vector<Aggregator> all = {Aggregator::mean,     Aggregator::gcn,
                                              Aggregator::gat,      Aggregator::max_pool,
                                              Aggregator::nim_plain, Aggregator::nim_amplified};
  return all;
}

std::string to_string(Verdict v) { return v == Verdict::degenerate ? "degenerate" : "separated"; }

graph::DirectedGraph twin_stars(std::size_t m, std::size_t n) {
  std::vector<graph::Edge> edges;
  for (std::size_t k = 1; k <= m; ++k) edges.push_back({k, 0});
  const std::size_t c = m + 1;
  for (std::size_t k = 1; k <= n; ++k) edges.push_back({c + k, c});
  return graph::DirectedGraph::from_edge_list(edges, m + n + 2);
}

graph::DirectedGraph twin_cliques(std::size_t m, std::size_t n) {
  std::vector<graph::Edge> edges;
  auto clique = [&](std::size_t first, std::size_t size) {
    for (std::size_t a = first; a < first + size; ++a)
      for (std::size_t b = first; b < first + size; ++b)
        if (a != b) edges.push_back({a, b});
  };
  clique(0, m + 1);
  clique(m + 1, n + 1);
  return graph::DirectedGraph::from_edge_list(edges, m + n + 2);
}

namespace {

struct Shared {
  std::vector<double> feature;
  ag::Tensor weight;  // feature_width x hidden
  ag::Tensor attn_dst, attn_src;
};

Shared draw(const PropcheckOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Shared s;
  // A positive feature keeps some hidden units active after ReLU.
  for (std::size_t j = 0; j < o.feature_width; ++j) s.feature.push_back(0.5 + std::abs(u(rng)));
  s.weight = ag::Tensor(o.feature_width, o.hidden);
  for (std::size_t i = 0; i < s.weight.size(); ++i) s.weight[i] = u(rng);
  s.attn_dst = ag::Tensor(o.hidden, 1);
  s.attn_src = ag::Tensor(o.hidden, 1);
  for (std::size_t i = 0; i < o.hidden; ++i) {
    s.attn_dst[i] = u(rng);
    s.attn_src[i] = u(rng);
  }
  return s;
}

std::vector<double> transform(const Shared& s, std::size_t hidden) {
  std::vector<double> out(hidden, 0.0);
  for (std::size_t j = 0; j < s.feature.size(); ++j)
    for (std::size_t h = 0; h < hidden; ++h) out[h] += s.feature[j] * s.weight(j, h);
  return out;
}

double leaky(double x) { return x > 0.0 ? x : 0.2 * x; }

/// Reference weighted aggregation ReLU(sum_k w_k * Wp_k) at one center.
std::vector<double> weighted_center(const graph::DirectedGraph& g, std::size_t center,
                                    const std::vector<double>& wp,
                                    const std::vector<double>& weights) {
  const auto edges = g.aggregation_edges();
  const std::size_t hsz = wp.size();
  std::vector<double> hi(hsz, 0.0), lo(hsz, 0.0), out(hsz);
  std::size_t k = 0;
  for (std::size_t e = edges->offsets[center]; e < edges->offsets[center + 1]; ++e, ++k)
    ag::compensated_axpy(weights[k], wp.data(), hi.data(), lo.data(), hsz);
  ag::compensated_finish(hi.data(), lo.data(), out.data(), hsz);
  for (double& x : out) x = std::max(x, 0.0);
  return out;
}

std::vector<double> reference_center(Aggregator a, const graph::DirectedGraph& g, std::size_t center,
                                     const Shared& s, std::size_t hidden) {
  const std::vector<double> wp = transform(s, hidden);
  const auto edges = g.aggregation_edges();
  const std::size_t begin = edges->offsets[center], end = edges->offsets[center + 1];
  const std::size_t count = end - begin;
  const auto& deg = g.deg_tilde();
  std::vector<double> w(count);
  switch (a) {
    case Aggregator::mean:
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(count));
      break;
    case Aggregator::gcn:
      for (std::size_t e = begin; e < end; ++e)
        w[e - begin] = 1.0 / std::sqrt(static_cast<double>(deg[center]) *
                                       static_cast<double>(deg[edges->src[e]]));
      break;
    case Aggregator::gat: {
      double dst_score = 0.0, src_score = 0.0;
      for (std::size_t h = 0; h < hidden; ++h) {
        dst_score += wp[h] * s.attn_dst[h];
        src_score += wp[h] * s.attn_src[h];
      }
      std::vector<double> raw(count, leaky(dst_score + src_score));
      const double top = *std::max_element(raw.begin(), raw.end());
      double denom = 0.0;
      for (std::size_t k = 0; k < count; ++k) denom += (w[k] = std::exp(raw[k] - top));
      for (double& x : w) x /= denom;
      break;
    }
    case Aggregator::max_pool: {
      std::vector<double> out(hidden, -INFINITY);
      for (std::size_t e = begin; e < end; ++e)
        for (std::size_t h = 0; h < hidden; ++h) out[h] = std::max(out[h], wp[h]);
      for (double& x : out) x = std::max(x, 0.0);
      return out;
    }
    default:
      throw UsageError("reference_center: not a reference aggregator");
  }
  return weighted_center(g, center, wp, w);
}

ag::Tensor nim_centers(bool amplified, std::size_t m, std::size_t n, const PropcheckOptions& o) {
  const graph::DirectedGraph g = twin_stars(m, n);
  const std::size_t total = g.num_nodes();
  const Shared s = draw(o);
  ag::Tensor x(total, o.feature_width);
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t j = 0; j < o.feature_width; ++j) x(i, j) = s.feature[j];
  const ag::Tensor t(total, 1, 1.0);
  ag::Rng rng(o.seed);
  layers::NimLayer layer("prop", o.feature_width, 1, 1, o.hidden, layers::AttentionForm::gat, rng);
  std::vector<std::size_t> all(total);
  for (std::size_t i = 0; i < total; ++i) all[i] = i;
  layers::Amplifier amp(g.deg_tilde(), all, amplified ? 1.0 : 0.0, false);
  ag::Tape tape;
  const layers::NimState out =
      layer.forward(tape, layers::initial_state(tape, x, t), g, layers::NimWiring{}, &amp);
  const ag::Tensor& zx = out.covariate.value();
  ag::Tensor centers(2, zx.cols());
  for (std::size_t h = 0; h < zx.cols(); ++h) {
    centers(0, h) = zx(0, h);
    centers(1, h) = zx(m + 1, h);
  }
  return centers;
}

double norm(const ag::Tensor& t, std::size_t row) {
  double s = 0.0;
  for (double x : t.row(row)) s += x * x;
  return std::sqrt(s);
}

}  // namespace

ag::Tensor center_outputs(Aggregator a, std::size_t m, std::size_t n, const PropcheckOptions& o) {
  if (m == 0 || n == 0) throw ConfigError("propcheck: local networks need at least one neighbor");
  if (a == Aggregator::nim_plain || a == Aggregator::nim_amplified) {
    return nim_centers(a == Aggregator::nim_amplified, m, n, o);
  }
  const graph::DirectedGraph g = a == Aggregator::gcn ? twin_cliques(m, n) : twin_stars(m, n);
  const Shared s = draw(o);
  const auto c0 = reference_center(a, g, 0, s, o.hidden);
  const auto c1 = reference_center(a, g, m + 1, s, o.hidden);
  ag::Tensor out(2, o.hidden);
  for (std::size_t h = 0; h < o.hidden; ++h) {
    out(0, h) = c0[h];
    out(1, h) = c1[h];
  }
  return out;
}

PropCase run_case(Aggregator a, std::size_t m, std::size_t n, const PropcheckOptions& o) {
  if (m == n) throw ConfigError("propcheck: local network sizes must differ");
  PropCase c;
  c.aggregator = a;
  c.m = m;
  c.n = n;
  c.expected = a == Aggregator::nim_amplified ? Verdict::separated : Verdict::degenerate;
  const ag::Tensor centers = center_outputs(a, m, n, o);
  bool equal = true;
  for (std::size_t h = 0; h < centers.cols(); ++h) {
    c.gap = std::max(c.gap, std::abs(centers(0, h) - centers(1, h)));
    equal = equal && centers(0, h) == centers(1, h);
  }
  c.measured = equal ? Verdict::degenerate : Verdict::separated;
  const double n0 = norm(centers, 0), n1 = norm(centers, 1);
  c.ratio = n1 > 0.0 ? n0 / n1 : 1.0;
  if (a == Aggregator::nim_amplified) {
    const double d = std::log(static_cast<double>(m + 1)) + std::log(static_cast<double>(n + 1));
    c.expected_ratio = (1.0 + std::log(static_cast<double>(m + 1)) / d) /
                       (1.0 + std::log(static_cast<double>(n + 1)) / d);
    c.passed = c.measured == Verdict::separated && n1 > 0.0 &&
               std::abs(c.ratio - c.expected_ratio) <= o.ratio_tolerance;
  } else {
    c.passed = c.measured == c.expected;
  }
  return c;
}

bool PropReport::passed() const {
  if (!monotone) return false;
  return std::all_of(cases.begin(), cases.end(), [](const PropCase& c) { return c.passed; });
}

PropReport run_propcheck(const std::vector<Aggregator>& aggregators,
                         const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                         const PropcheckOptions& o) {
  PropReport r;
  for (const auto& [m, n] : sizes)
    for (Aggregator a : aggregators) r.cases.push_back(run_case(a, m, n, o));
  r.monotone = true;
  if (!sizes.empty()) {
    const std::size_t m = sizes.front().first;
    double previous = -1.0;
    for (std::size_t n = m + 1; n <= m + 8; ++n) {
      const double gap = std::abs(run_case(Aggregator::nim_amplified, m, n, o).ratio - 1.0);
      if (!(gap > previous)) r.monotone = false;
      previous = gap;
    }
  }
  return r;
}

void write_report_csv(std::ostream& out, const PropReport& r) {
  out << "aggregator,m,n,expected,measured,gap,ratio,expected_ratio,passed\n";
  for (const PropCase& c : r.cases) {
    out << to_string(c.aggregator) << ',' << c.m << ',' << c.n << ',' << to_string(c.expected) << ','
        << to_string(c.measured) << ',' << config::format_double(c.gap) << ','
        << config::format_double(c.ratio) << ',' << config::format_double(c.expected_ratio) << ','
        << (c.passed ? "true" : "false") << '\n';
  }
}

void write_report_summary(std::ostream& out, const PropReport& r) {
  std::size_t ok = 0;
  for (const PropCase& c : r.cases) {
    if (c.passed) ++ok;
    else {
      out << "FAIL " << to_string(c.aggregator) << " m=" << c.m << " n=" << c.n << ": expected "
          << to_string(c.expected) << ", measured " << to_string(c.measured) << " (ratio "
          << config::format_double(c.ratio) << " vs " << config::format_double(c.expected_ratio) << ")\n";
    }
  }
  out << ok << "/" << r.cases.size() << " cases passed; amplified gap "
      << (r.monotone ? "grows" : "does not grow") << " with the size difference\n";
}

}  // namespace gite::metrics

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gite/ag/tensor.hpp"
#include "gite/graph/directed_graph.hpp"

namespace gite::data {

/// Node indices of each partition.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

enum class Part { train, val, test, all };

Part parse_part(const std::string& text);
std::string to_string(Part part);

/// Observational graph data. Treatments and outcomes are [n, 1] columns.
struct Dataset {
  graph::DirectedGraph graph;
  ag::Tensor covariates;
  ag::Tensor treatments;
  ag::Tensor outcomes;
  std::optional<ag::Tensor> tau;
  /// Set when tau was produced by the simulator rather than read from a file.
  bool tau_simulated = false;
  Split split;

  std::size_t num_nodes() const { return covariates.rows(); }
  std::size_t num_covariates() const { return covariates.cols(); }
  /// Indices of a partition; `all` lists every node.
  std::vector<std::size_t> indices(Part part) const;

  /// Throws IngestError on inconsistent sizes, non-binary treatments,
  /// non-finite values or an invalid split.
  void validate() const;
};

/// Random permutation split: train = floor(0.70 n), val = floor(0.15 n),
/// test = the rest. Requires n >= 10.
Split make_split(std::size_t n, std::uint64_t seed);

/// Affine outcome normalization y' = (y - mean) / scale.
struct ZScore {
  bool enabled = false;
  double mean = 0.0;
  double scale = 1.0;

  /// Statistics from the given rows. Falls back to scale 1 for constant data.
  static ZScore fit(const ag::Tensor& y, const std::vector<std::size_t>& rows);
  ag::Tensor apply(const ag::Tensor& y) const;
  ag::Tensor invert(const ag::Tensor& y) const;
  /// Converts a difference of normalized values (an effect) to original units.
  ag::Tensor invert_effect(const ag::Tensor& effect) const;
};

}  // namespace gite::data

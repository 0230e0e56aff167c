#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gite/ag/tensor.hpp"
#include "gite/config/key_value.hpp"
#include "gite/data/dataset.hpp"
#include "gite/graph/directed_graph.hpp"

namespace gite::data {

enum class GraphModel {
  /// Barabasi-Albert growth with mean_degree / 2 links per new node; every
  /// link is added in both directions.
  preferential,
  /// Each ordered pair independently with edge_probability.
  random,
};

enum class WeightLaw { normal, uniform };

GraphModel parse_graph_model(const std::string& text);
std::string to_string(GraphModel g);
WeightLaw parse_weight_law(const std::string& text);
std::string to_string(WeightLaw w);

struct SimConfig {
  std::size_t n = 500;
  std::size_t covariates = 50;
  GraphModel graph = GraphModel::preferential;
  double mean_degree = 10.0;
  /// Random graphs only; 0 means mean_degree / (n - 1).
  double edge_probability = 0.0;
  WeightLaw law = WeightLaw::normal;
  /// Scale of the treatment and outcome noise draws.
  double noise_std = 1.0;
  /// Multiplies the effect weights, hence the true ITE.
  double effect_scale = 1.0;
  std::size_t hops = 3;
  /// Draw fresh edge weights for every hop instead of reusing one draw.
  bool resample_edge_weights = false;
  /// Standardize the aggregated covariate signal before the propensity link.
  bool standardize_agg = false;
  /// When positive, the two aggregated terms enter the outcome standardized
  /// and multiplied by this value; 0 keeps them raw.
  double agg_outcome_scale = 0.0;
  std::uint64_t seed = 0;

  void write(config::KeyValue& kv) const;
  static SimConfig read(const config::KeyValue& kv);
  static const std::vector<std::string>& keys();
};

/// Intermediate quantities of a simulation, for independent checking.
struct SimTrace {
  /// Degree share log(deg_i) / sum over all nodes.
  ag::Tensor eta;
  ag::Tensor covariate_signal;  // x~, [n, 1]
  ag::Tensor treatment_signal;  // t~, [n, 1]
  /// Edge weights per hop, aligned with graph.neighbor_edges().
  std::vector<ag::Tensor> edge_weights;
  ag::Tensor agg_covariate;
  ag::Tensor agg_treatment;
  ag::Tensor propensity;
  ag::Tensor w_treat, w_graph, w_outcome, w_effect;
};

graph::DirectedGraph generate_graph(const SimConfig& config, std::mt19937_64& rng);

/// Synthetic dataset with known ITE; split seeded from config.seed.
Dataset simulate(const SimConfig& config, SimTrace* trace = nullptr);

/// h_i <- sum over in-edges e of w_e h_src(e), repeated once per weight set.
ag::Tensor propagate(const graph::DirectedGraph& graph, const ag::Tensor& signal,
                     const std::vector<ag::Tensor>& edge_weights);

}  // namespace gite::data

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gite/ag/ops.hpp"
#include "gite/graph/directed_graph.hpp"
#include "gite/layers/attention.hpp"

namespace gite::layers {

/// How neighbor messages are weighted inside a NIM layer.
enum class Weighting {
  attention,  // softmax partial attention
  uniform,    // 1 / |N_i + self|
  sum,        // unweighted sum
};

/// Structural switches of the NIM stack, set by the model variant.
struct NimWiring {
  Weighting weighting = Weighting::attention;
  /// Keep the structure-attention branch and the summary weight.
  bool structure_branch = true;
  bool amplifier = true;
};

/// Degree rescaling z_i <- (1 + pi_eta * log(deg_i) / D) z_i, with D the sum
/// of log degrees over the reference (training) nodes.
class Amplifier {
 public:
  Amplifier() = default;
  /// Warns and disables itself when D is 0.
  Amplifier(const std::vector<std::size_t>& deg_tilde, const std::vector<std::size_t>& reference,
            double pi_eta, bool learnable);

  /// log(deg_i) / D per node, [n, 1].
  const ag::Tensor& log_degree_share() const { return share_; }
  double denominator() const { return denominator_; }
  bool enabled() const { return enabled_; }
  bool learnable() const { return learnable_; }
  ag::Parameter& pi_eta() { return pi_eta_; }
  const ag::Parameter& pi_eta() const { return pi_eta_; }

  ag::Var apply(ag::Tape& tape, const ag::Var& z);

 private:
  ag::Tensor share_;
  double denominator_ = 0.0;
  bool enabled_ = false;
  bool learnable_ = false;
  ag::Parameter pi_eta_{"amplifier.pi_eta", ag::Tensor::scalar(1.0)};
};

/// Per-layer representations.
struct NimState {
  ag::Var structure;  // z_S
  ag::Var covariate;  // z_X
  ag::Var treatment;  // z_T
};

/// Attention weights produced by one layer, for inspection.
struct AttentionRecord {
  std::string name;
  ag::Var weights;
};

class NimLayer {
 public:
  NimLayer() = default;
  NimLayer(std::string name, std::size_t covariate_width, std::size_t treatment_width,
           std::size_t structure_width, std::size_t hidden, AttentionForm form, ag::Rng& rng);

  NimState forward(ag::Tape& tape, const NimState& prev, const graph::DirectedGraph& graph,
                   const NimWiring& wiring, Amplifier* amplifier,
                   std::vector<AttentionRecord>* attention = nullptr);

  void collect(std::vector<ag::Parameter*>& out);

  // Structure encoder.
  ag::Parameter structure_weight;
  ag::Parameter structure_eps;
  // Interference and structure partial attention, per channel.
  PartialAttention ip_covariate, ip_treatment, st_covariate, st_treatment;
  // Message transforms.
  ag::Parameter covariate_in, covariate_st, treatment_in, treatment_st;
  // Raw summary weights.
  ag::Parameter covariate_mix, treatment_mix;
};

/// Input representations: z_S = 1, z_X = X, z_T = T.
NimState initial_state(ag::Tape& tape, const ag::Tensor& covariates, const ag::Tensor& treatments);

}  // namespace gite::layers

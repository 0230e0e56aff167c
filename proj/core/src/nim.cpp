#include "gite/layers/nim.hpp"

#include <cmath>

#include "gite/error.hpp"
#include "gite/layers/mlp.hpp"
#include "gite/log.hpp"

namespace gite::layers {

Amplifier::Amplifier(const std::vector<std::size_t>& deg_tilde,
                     const std::vector<std::size_t>& reference, double pi_eta, bool learnable)
    : share_(deg_tilde.size(), 1), learnable_(learnable) {
  if (!std::isfinite(pi_eta)) throw ConfigError("amplifier: pi_eta must be finite");
  pi_eta_.value[0] = pi_eta;
  for (std::size_t i : reference) {
    if (i >= deg_tilde.size()) throw UsageError("amplifier: reference node out of range");
    denominator_ += std::log(static_cast<double>(deg_tilde[i]));
  }
  enabled_ = denominator_ > 0.0;
  if (!enabled_) {
    log::warn("amplifier: every reference node has degree 1; amplifier disabled");
    return;
  }
  for (std::size_t i = 0; i < deg_tilde.size(); ++i)
    share_[i] = std::log(static_cast<double>(deg_tilde[i])) / denominator_;
}

ag::Var Amplifier::apply(ag::Tape& tape, const ag::Var& z) {
  if (!enabled_) return z;
  if (share_.rows() != z.rows()) {
    throw ShapeError("amplifier: built for " + std::to_string(share_.rows()) + " nodes, got " +
                     std::to_string(z.rows()));
  }
  if (learnable_) {
    const ag::Var factor =
        ag::add_scalar(ag::scale_by(tape.constant(share_), tape.leaf(pi_eta_)), 1.0);
    return ag::row_scale(z, factor);
  }
  ag::Tensor factor(share_.rows(), 1);
  const double eta = pi_eta_.value[0];
  for (std::size_t i = 0; i < factor.size(); ++i) factor[i] = 1.0 + eta * share_[i];
  return ag::row_scale(z, tape.constant(std::move(factor)));
}

NimLayer::NimLayer(std::string name, std::size_t covariate_width, std::size_t treatment_width,
                   std::size_t structure_width, std::size_t hidden, AttentionForm form,
                   ag::Rng& rng)
    : structure_weight(fan_in_uniform(name + ".structure.W", structure_width, hidden, rng)),
      structure_eps{name + ".structure.eps", ag::Tensor::scalar(0.0)},
      ip_covariate(name + ".ip_x", covariate_width, hidden, form, rng),
      ip_treatment(name + ".ip_t", covariate_width + treatment_width, hidden, form, rng),
      st_covariate(name + ".st_x", structure_width, hidden, form, rng),
      st_treatment(name + ".st_t", structure_width, hidden, form, rng),
      covariate_in(fan_in_uniform(name + ".x.W_in", covariate_width, hidden, rng)),
      covariate_st(fan_in_uniform(name + ".x.W_st", covariate_width, hidden, rng)),
      treatment_in(fan_in_uniform(name + ".t.W_in", treatment_width, hidden, rng)),
      treatment_st(fan_in_uniform(name + ".t.W_st", treatment_width, hidden, rng)),
      covariate_mix{name + ".x.mix", ag::Tensor::scalar(0.5)},
      treatment_mix{name + ".t.mix", ag::Tensor::scalar(0.5)} {}

namespace {

ag::Var uniform_weights(ag::Tape& tape, const ag::EdgeList& edges) {
  ag::Tensor w(edges.num_edges(), 1);
  for (std::size_t i = 0; i < edges.num_nodes; ++i) {
    const std::size_t begin = edges.offsets[i], end = edges.offsets[i + 1];
    const double share = 1.0 / static_cast<double>(end - begin);
    for (std::size_t e = begin; e < end; ++e) w[e] = share;
  }
  return tape.constant(std::move(w));
}

}  // namespace

NimState NimLayer::forward(ag::Tape& tape, const NimState& prev,
                           const graph::DirectedGraph& graph, const NimWiring& wiring,
                           Amplifier* amplifier, std::vector<AttentionRecord>* attention) {
  const auto edges = graph.aggregation_edges();
  NimState next;

  // Structure: ReLU(((1 + eps) z_i + sum_{k in N_i} z_k) W), as a sum over
  // N_i + self plus eps * z_i.
  const ag::Var s_sum = ag::edge_aggregate(prev.structure, nullptr, edges);
  const ag::Var s_mix = ag::add(s_sum, ag::scale_by(prev.structure, tape.leaf(structure_eps)));
  next.structure = ag::relu(ag::matmul(s_mix, tape.leaf(structure_weight)));

  const ag::Var joint = ag::concat_cols({prev.covariate, prev.treatment});

  auto channel = [&](const ag::Var& input, const ag::Var& ip_input, PartialAttention& ip,
                     PartialAttention& st, ag::Parameter& w_in, ag::Parameter& w_st,
                     ag::Parameter& mix, const char* tag) {
    std::optional<ag::Var> a_in, a_st;
    if (wiring.weighting == Weighting::attention) {
      a_in = ip.weights(tape, ip_input, edges);
      if (attention != nullptr) attention->push_back({std::string("ip_") + tag, *a_in});
      if (wiring.structure_branch) {
        a_st = st.weights(tape, prev.structure, edges);
        if (attention != nullptr) attention->push_back({std::string("st_") + tag, *a_st});
      }
    } else if (wiring.weighting == Weighting::uniform) {
      a_in = uniform_weights(tape, *edges);
      a_st = a_in;
    }
    const ag::Var* w1 = a_in ? &*a_in : nullptr;
    const ag::Var in_branch =
        ag::relu(ag::edge_aggregate(ag::matmul(input, tape.leaf(w_in)), w1, edges));
    ag::Var out = in_branch;
    if (wiring.structure_branch) {
      const ag::Var* w2 = a_st ? &*a_st : nullptr;
      const ag::Var st_branch =
          ag::relu(ag::edge_aggregate(ag::matmul(input, tape.leaf(w_st)), w2, edges));
      const ag::Var pi = summary_weight(tape.leaf(mix));
      const ag::Var rest = ag::add_scalar(ag::scale(pi, -1.0), 1.0);
      out = ag::add(ag::scale_by(in_branch, pi), ag::scale_by(st_branch, rest));
    }
    if (wiring.amplifier && amplifier != nullptr) out = amplifier->apply(tape, out);
    return out;
  };

  next.covariate = channel(prev.covariate, prev.covariate, ip_covariate, st_covariate,
                           covariate_in, covariate_st, covariate_mix, "x");
  next.treatment = channel(prev.treatment, joint, ip_treatment, st_treatment, treatment_in,
                           treatment_st, treatment_mix, "t");
  return next;
}

void NimLayer::collect(std::vector<ag::Parameter*>& out) {
  out.push_back(&structure_weight);
  out.push_back(&structure_eps);
  ip_covariate.collect(out);
  ip_treatment.collect(out);
  st_covariate.collect(out);
  st_treatment.collect(out);
  out.push_back(&covariate_in);
  out.push_back(&covariate_st);
  out.push_back(&treatment_in);
  out.push_back(&treatment_st);
  out.push_back(&covariate_mix);
  out.push_back(&treatment_mix);
}

NimState initial_state(ag::Tape& tape, const ag::Tensor& covariates, const ag::Tensor& treatments) {
  if (treatments.rows() != covariates.rows()) {
    throw ShapeError("initial_state: " + shape_string(covariates) + " covariates vs " +
                     shape_string(treatments) + " treatments");
  }
  NimState s;
  s.structure = tape.constant(ag::Tensor(covariates.rows(), 1, 1.0));
  s.covariate = tape.constant(covariates);
  s.treatment = tape.constant(treatments);
  return s;
}

}  // namespace gite::layers

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gite/ag/ops.hpp"

namespace gite::layers {

enum class AttentionForm { gat, qk };

AttentionForm parse_attention_form(const std::string& text);
std::string to_string(AttentionForm form);

/// Scores how much a source node matters to a destination node, from
/// per-node input vectors.
///   gat: LeakyReLU(0.2) of a^T [W p_dst || W p_src]
///   qk:  (W_Q p_dst) . (W_K p_src) / sqrt(key width)
class PartialAttention {
 public:
  static constexpr double kLeakySlope = 0.2;

  PartialAttention() = default;
  PartialAttention(std::string name, std::size_t in_width, std::size_t key_width,
                   AttentionForm form, ag::Rng& rng);

  /// Raw score per edge of `edges`, shape [num_edges, 1].
  ag::Var scores(ag::Tape& tape, const ag::Var& p, const std::shared_ptr<const ag::EdgeList>& edges);
  /// Softmax of the scores over each destination's incoming edges.
  ag::Var weights(ag::Tape& tape, const ag::Var& p, const std::shared_ptr<const ag::EdgeList>& edges);

  AttentionForm form() const { return form_; }
  void collect(std::vector<ag::Parameter*>& out);

  /// gat: {W, a_dst, a_src}; qk: {W_Q, W_K}.
  std::vector<ag::Parameter>& parameters() { return params_; }

 private:
  AttentionForm form_ = AttentionForm::gat;
  std::size_t key_width_ = 0;
  std::vector<ag::Parameter> params_;
};

/// Maps an unconstrained scalar a to exp(a) / (exp(a) + exp(1 - a)), which
/// lies strictly inside (0, 1) and equals 0.5 at a = 0.5.
ag::Var summary_weight(const ag::Var& raw);
double summary_weight(double raw);

}  // namespace gite::layers

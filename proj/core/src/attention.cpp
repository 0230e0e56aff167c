#include "gite/layers/attention.hpp"

#include <cmath>

#include "gite/error.hpp"
#include "gite/layers/mlp.hpp"

namespace gite::layers {

AttentionForm parse_attention_form(const std::string& text) {
  if (text == "gat") return AttentionForm::gat;
  if (text == "qk") return AttentionForm::qk;
  throw ConfigError("attention form must be 'gat' or 'qk', got '" + text + "'");
}

std::string to_string(AttentionForm form) { return form == AttentionForm::gat ? "gat" : "qk"; }

PartialAttention::PartialAttention(std::string name, std::size_t in_width,
                                   std::size_t key_width, AttentionForm form, ag::Rng& rng)
    : form_(form), key_width_(key_width) {
  if (key_width == 0) throw ConfigError("attention " + name + ": key width must be positive");
  if (form == AttentionForm::gat) {
    params_.push_back(fan_in_uniform(name + ".W", in_width, key_width, rng));
    params_.push_back(fan_in_uniform(name + ".a_dst", key_width, 1, rng));
    params_.push_back(fan_in_uniform(name + ".a_src", key_width, 1, rng));
  } else {
    params_.push_back(fan_in_uniform(name + ".W_Q", in_width, key_width, rng));
    params_.push_back(fan_in_uniform(name + ".W_K", in_width, key_width, rng));
  }
}

ag::Var PartialAttention::scores(ag::Tape& tape, const ag::Var& p,
                                 const std::shared_ptr<const ag::EdgeList>& edges) {
  if (form_ == AttentionForm::gat) {
    const ag::Var h = ag::matmul(p, tape.leaf(params_[0]));
    const ag::Var s_dst = ag::matmul(h, tape.leaf(params_[1]));
    const ag::Var s_src = ag::matmul(h, tape.leaf(params_[2]));
    const ag::Var pair = ag::add(ag::gather_rows(s_dst, edges->dst), ag::gather_rows(s_src, edges->src));
    return ag::leaky_relu(pair, kLeakySlope);
  }
  const ag::Var q = ag::matmul(p, tape.leaf(params_[0]));
  const ag::Var k = ag::matmul(p, tape.leaf(params_[1]));
  return ag::scale(ag::edge_dot(q, k, edges), 1.0 / std::sqrt(static_cast<double>(key_width_)));
}

ag::Var PartialAttention::weights(ag::Tape& tape, const ag::Var& p,
                                  const std::shared_ptr<const ag::EdgeList>& edges) {
  return ag::softmax_over_group(scores(tape, p, edges), edges);
}

void PartialAttention::collect(std::vector<ag::Parameter*>& out) {
  for (ag::Parameter& p : params_) out.push_back(&p);
}

ag::Var summary_weight(const ag::Var& raw) {
  // exp(a) / (exp(a) + exp(1 - a)) = sigmoid(2a - 1)
  return ag::sigmoid(ag::add_scalar(ag::scale(raw, 2.0), -1.0));
}

double summary_weight(double raw) {
  const double x = 2.0 * raw - 1.0;
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace gite::layers

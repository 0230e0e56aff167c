#include "gite/train/adam.hpp"

#include <cmath>

#include "gite/error.hpp"

namespace gite::train {

Adam::Adam(std::vector<ag::Parameter*> params, const AdamOptions& options)
    : params_(std::move(params)), options_(options) {
  if (!(options.learning_rate >= 0.0)) throw ConfigError("adam: learning rate must be >= 0");
  if (!(options.weight_decay >= 0.0)) throw ConfigError("adam: weight decay must be >= 0");
  for (ag::Parameter* p : params_) {
    m_.push_back(ag::Tensor::zeros_like(p->value));
    v_.push_back(ag::Tensor::zeros_like(p->value));
  }
}

void Adam::step(const std::vector<ag::Tensor>& grads) {
  if (grads.size() != params_.size()) throw UsageError("adam: gradient count mismatch");
  ++t_;
  const double lr = options_.learning_rate;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ag::Tensor& theta = params_[k]->value;
    const ag::Tensor& g = grads[k];
    if (!g.same_shape(theta)) throw ShapeError("adam: gradient shape mismatch for " + params_[k]->name);
    ag::Tensor& m = m_[k];
    ag::Tensor& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
      theta[i] -= lr * (update + options_.weight_decay * theta[i]);
    }
  }
}

}  // namespace gite::train

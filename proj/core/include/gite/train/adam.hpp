#pragma once

#include <cstddef>
#include <vector>

#include "gite/ag/tape.hpp"

namespace gite::train {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled decay: theta -= learning_rate * weight_decay * theta.
  double weight_decay = 1e-3;
};

/// Adam with decoupled weight decay over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ag::Parameter*> params, const AdamOptions& options);

  /// One update from gradients aligned with the parameter list.
  void step(const std::vector<ag::Tensor>& grads);
  std::size_t steps() const { return t_; }

 private:
  std::vector<ag::Parameter*> params_;
  AdamOptions options_;
  std::vector<ag::Tensor> m_;
  std::vector<ag::Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace gite::train

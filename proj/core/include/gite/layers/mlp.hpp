#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gite/ag/ops.hpp"

namespace gite::layers {

/// rows x cols parameter drawn from U(-1/sqrt(rows), 1/sqrt(rows)).
ag::Parameter fan_in_uniform(std::string name, std::size_t rows, std::size_t cols,
                             ag::Rng& rng);

/// Options for a forward pass through layers that use dropout.
struct Mode {
  bool training = false;
  double dropout = 0.0;
  ag::Rng* rng = nullptr;
};

/// Fully connected stack. widths = {in, h1, ..., out}. ReLU follows every
/// hidden layer, and the output layer too when `relu_output` is set.
/// Dropout (training only) follows each hidden activation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, std::vector<std::size_t> widths, bool relu_output, ag::Rng& rng);

  ag::Var forward(ag::Tape& tape, const ag::Var& x, const Mode& mode = {});

  std::size_t in_width() const { return widths_.front(); }
  std::size_t out_width() const { return widths_.back(); }
  void collect(std::vector<ag::Parameter*>& out);

  std::vector<ag::Parameter>& weights() { return weights_; }
  std::vector<ag::Parameter>& biases() { return biases_; }

 private:
  std::vector<std::size_t> widths_;
  bool relu_output_ = false;
  std::vector<ag::Parameter> weights_;
  std::vector<ag::Parameter> biases_;
};

}  // namespace gite::layers

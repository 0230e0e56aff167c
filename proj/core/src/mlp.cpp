#include "gite/layers/mlp.hpp"

#include <cmath>
#include <random>

#include "gite/error.hpp"

namespace gite::layers {

ag::Parameter fan_in_uniform(std::string name, std::size_t rows, std::size_t cols,
                             ag::Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows == 0 ? 1 : rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ag::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return {std::move(name), std::move(t)};
}

Mlp::Mlp(std::string name, std::vector<std::size_t> widths, bool relu_output, ag::Rng& rng)
    : widths_(std::move(widths)), relu_output_(relu_output) {
  if (widths_.size() < 2) throw ConfigError("mlp " + name + ": needs at least two widths");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::string tag = name + "." + std::to_string(l);
    weights_.push_back(fan_in_uniform(tag + ".weight", widths_[l], widths_[l + 1], rng));
    ag::Parameter b = fan_in_uniform(tag + ".bias", 1, widths_[l + 1], rng);
    // Bias bound follows the layer's fan-in, not the 1-row shape.
    const double rescale = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    for (std::size_t j = 0; j < b.value.size(); ++j) b.value[j] *= rescale;
    biases_.push_back(std::move(b));
  }
}

ag::Var Mlp::forward(ag::Tape& tape, const ag::Var& x, const Mode& mode) {
  if (x.cols() != in_width()) {
    throw ShapeError("mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(in_width()));
  }
  ag::Var h = x;
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = ag::add_row(ag::matmul(h, tape.leaf(weights_[l])), tape.leaf(biases_[l]));
    const bool last = l + 1 == layers;
    if (!last || relu_output_) h = ag::relu(h);
    if (!last && mode.training && mode.dropout > 0.0) {
      if (mode.rng == nullptr) throw UsageError("mlp: dropout requested without an rng");
      h = ag::dropout(h, mode.dropout, *mode.rng, true);
    }
  }
  return h;
}

void Mlp::collect(std::vector<ag::Parameter*>& out) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
}

}  // namespace gite::layers

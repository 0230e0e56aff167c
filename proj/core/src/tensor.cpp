#include "gite/ag/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "gite/error.hpp"

namespace gite::ag {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                     " does not match shape [" + std::to_string(rows) + ", " +
                     std::to_string(cols) + "]");
  }
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

Tensor Tensor::zeros_like(const Tensor& other) {
  return Tensor(other.rows(), other.cols());
}

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw ShapeError("Tensor::item: expected [1, 1], got " + shape_string(*this));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + ", " + std::to_string(t.cols()) + "]";
}

}  // namespace gite::ag

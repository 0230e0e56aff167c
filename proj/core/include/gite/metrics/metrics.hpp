#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gite/ag/tensor.hpp"

namespace gite::metrics {

struct MetricsRecord {
  double sqrt_mse = 0.0;
  /// Absent when the true effect is unknown.
  std::optional<double> sqrt_pehe;
  std::string split;
  std::uint64_t seed = 0;
  std::string variant;
};

/// Root mean squared difference over the listed rows (all rows when empty).
double rmse(const ag::Tensor& a, const ag::Tensor& b, const std::vector<std::size_t>& rows = {});

/// Outcome error, and effect error when both effect tensors are given.
MetricsRecord compute_metrics(const ag::Tensor& y_hat, const ag::Tensor& y,
                              const ag::Tensor* tau_hat, const ag::Tensor* tau,
                              const std::vector<std::size_t>& rows = {});

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation / sqrt(count); 0 for fewer than two values.
  double std_error = 0.0;
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);

}  // namespace gite::metrics

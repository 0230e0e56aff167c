#include "gite/metrics/metrics.hpp"

#include <cmath>

#include "gite/error.hpp"

namespace gite::metrics {

double rmse(const ag::Tensor& a, const ag::Tensor& b, const std::vector<std::size_t>& rows) {
  if (!a.same_shape(b)) {
    throw ShapeError("rmse: length mismatch " + ag::shape_string(a) + " vs " + ag::shape_string(b));
  }
  double acc = 0.0;
  std::size_t count = 0;
  if (rows.empty()) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    count = a.size();
  } else {
    for (std::size_t i : rows) {
      if (i >= a.size()) throw ShapeError("rmse: row " + std::to_string(i) + " out of range");
      acc += (a[i] - b[i]) * (a[i] - b[i]);
    }
    count = rows.size();
  }
  if (count == 0) throw ShapeError("rmse: no rows");
  return std::sqrt(acc / static_cast<double>(count));
}

MetricsRecord compute_metrics(const ag::Tensor& y_hat, const ag::Tensor& y, const ag::Tensor* tau_hat,
                              const ag::Tensor* tau, const std::vector<std::size_t>& rows) {
  MetricsRecord r;
  r.sqrt_mse = rmse(y_hat, y, rows);
  if (tau_hat != nullptr && tau != nullptr) r.sqrt_pehe = rmse(*tau_hat, *tau, rows);
  return r;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  s.std_error = sd / std::sqrt(static_cast<double>(values.size()));
  return s;
}

}  // namespace gite::metrics

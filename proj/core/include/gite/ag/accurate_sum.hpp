#pragma once

#include <cmath>
#include <cstddef>

namespace gite::ag {

// Error-free transformations (Knuth TwoSum, FMA TwoProduct). A weighted sum
// accumulated through CompensatedAccumulator is as accurate as if computed in
// twice the working precision and rounded once. In particular
// sum_k w_k * u with w_k = fl(1/K) for K terms returns u exactly, which keeps
// normalized aggregations over identical inputs independent of K.

inline void two_sum(double a, double b, double& sum, double& err) {
  sum = a + b;
  const double bb = sum - a;
  err = (a - (sum - bb)) + (b - bb);
}

/// Accumulates w * x into (hi, lo) for each lane of a row.
inline void compensated_axpy(double w, const double* x, double* hi, double* lo,
                             std::size_t n) {
  for (std::size_t d = 0; d < n; ++d) {
    const double p = w * x[d];
    const double ep = std::fma(w, x[d], -p);
    const double s = hi[d] + p;
    const double bb = s - hi[d];
    const double es = (hi[d] - (s - bb)) + (p - bb);
    hi[d] = s;
    lo[d] += es + ep;
  }
}

inline void compensated_finish(const double* hi, const double* lo, double* out,
                               std::size_t n) {
  for (std::size_t d = 0; d < n; ++d) out[d] = hi[d] + lo[d];
}

}  // namespace gite::ag

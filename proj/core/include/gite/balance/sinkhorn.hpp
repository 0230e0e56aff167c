#pragma once

#include <cstddef>
#include <vector>

#include "gite/ag/tensor.hpp"

namespace gite::balance {

struct SinkhornOptions {
  double xi = 0.1;
  std::size_t max_iter = 200;
  double tol = 1e-6;
};

/// Dual potentials; plan_ij = exp(-(D_ij - f_i - g_j) / xi).
struct Potentials {
  std::vector<double> f;
  std::vector<double> g;
};

struct SinkhornPlan {
  ag::Tensor plan;
  /// <D, plan>.
  double cost = 0.0;
  std::size_t iterations = 0;
  /// Summed absolute violation of the row marginal (columns are exact after
  /// each sweep).
  double marginal_error = 0.0;
  bool converged = false;
  Potentials potentials;
};

/// Entropic optimal transport between uniform marginals over the rows and
/// columns of `cost`. Scaling iterations run on a kernel whose potentials are
/// periodically absorbed, so tiny `xi` does not underflow the kernel.
/// Throws NumericError on non-finite costs or a vanishing kernel row.
/// `warm` potentials of matching size replace the cold start.
SinkhornPlan sinkhorn(const ag::Tensor& cost, const SinkhornOptions& options = {},
                      const Potentials* warm = nullptr);

}  // namespace gite::balance

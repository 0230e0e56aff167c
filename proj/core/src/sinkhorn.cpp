#include "gite/balance/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gite/error.hpp"

namespace gite::balance {
namespace {

// Scalings beyond exp(+-kAbsorb) are folded into the potentials.
constexpr double kAbsorb = 100.0;

SinkhornPlan solve(const ag::Tensor& cost, const SinkhornOptions& options, const Potentials* warm) {
  const std::size_t n1 = cost.rows(), n0 = cost.cols();
  if (n1 == 0 || n0 == 0) throw ShapeError("sinkhorn: empty cost " + shape_string(cost));
  if (!(options.xi > 0.0) || !std::isfinite(options.xi)) {
    throw ConfigError("sinkhorn: xi must be positive and finite");
  }
  if (!cost.all_finite()) throw NumericError("sinkhorn: non-finite cost entry");

  const double a = 1.0 / static_cast<double>(n1);
  const double b = 1.0 / static_cast<double>(n0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> f(n1, inf), g(n0, inf);
  if (warm != nullptr) {
    f = warm->f;
    g = warm->g;
  } else {
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n0; ++j) f[i] = std::min(f[i], cost(i, j));
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n0; ++j) g[j] = std::min(g[j], cost(i, j) - f[i]);
  }

  ag::Tensor kernel(n1, n0);
  auto rebuild = [&] {
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n0; ++j)
        kernel(i, j) = std::exp(-(cost(i, j) - f[i] - g[j]) / options.xi);
  };
  rebuild();

  std::vector<double> u(n1, 1.0), v(n0, 1.0), kv(n1), ktu(n0);
  SinkhornPlan result;
  auto kernel_times_v = [&] {
    for (std::size_t i = 0; i < n1; ++i) {
      const double* k = &kernel(i, 0);
      double s[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t j = 0;
      for (; j + 4 <= n0; j += 4)
        for (std::size_t l = 0; l < 4; ++l) s[l] += k[j + l] * v[j + l];
      for (; j < n0; ++j) s[0] += k[j] * v[j];
      kv[i] = (s[0] + s[1]) + (s[2] + s[3]);
    }
  };

  // Each pass first measures the row marginals of the current scalings, so
  // the convergence check shares the product needed by the next update.
  kernel_times_v();
  for (std::size_t it = 0;; ++it) {
    double err = 0.0;
    for (std::size_t i = 0; i < n1; ++i) err += std::abs(u[i] * kv[i] - a);
    result.marginal_error = err;
    if (it > 0 && err < options.tol) {
      result.converged = true;
      break;
    }
    if (it == options.max_iter) break;

    for (std::size_t i = 0; i < n1; ++i) {
      if (!(kv[i] > 0.0)) {
        throw NumericError("sinkhorn: kernel row " + std::to_string(i) +
                           " vanished; cost scale too large for xi");
      }
      u[i] = a / kv[i];
    }
    std::fill(ktu.begin(), ktu.end(), 0.0);
    for (std::size_t i = 0; i < n1; ++i) {
      const double* k = &kernel(i, 0);
      for (std::size_t j = 0; j < n0; ++j) ktu[j] += k[j] * u[i];
    }
    for (std::size_t j = 0; j < n0; ++j) {
      if (!(ktu[j] > 0.0)) {
        throw NumericError("sinkhorn: kernel column " + std::to_string(j) +
                           " vanished; cost scale too large for xi");
      }
      v[j] = b / ktu[j];
    }
    result.iterations = it + 1;

    double extreme = 0.0;
    for (double x : u) extreme = std::max(extreme, std::abs(std::log(x)));
    for (double x : v) extreme = std::max(extreme, std::abs(std::log(x)));
    if (extreme > kAbsorb) {
      for (std::size_t i = 0; i < n1; ++i) f[i] += options.xi * std::log(u[i]);
      for (std::size_t j = 0; j < n0; ++j) g[j] += options.xi * std::log(v[j]);
      std::fill(u.begin(), u.end(), 1.0);
      std::fill(v.begin(), v.end(), 1.0);
      rebuild();
    }
    kernel_times_v();
  }

  result.plan = ag::Tensor(n1, n0);
  double total = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n0; ++j) {
      const double p = u[i] * kernel(i, j) * v[j];
      result.plan(i, j) = p;
      total += p * cost(i, j);
    }
  result.cost = total;
  result.potentials.f.resize(n1);
  result.potentials.g.resize(n0);
  for (std::size_t i = 0; i < n1; ++i) result.potentials.f[i] = f[i] + options.xi * std::log(u[i]);
  for (std::size_t j = 0; j < n0; ++j) result.potentials.g[j] = g[j] + options.xi * std::log(v[j]);
  return result;
}

}  // namespace

SinkhornPlan sinkhorn(const ag::Tensor& cost, const SinkhornOptions& options, const Potentials* warm) {
  if (warm != nullptr && warm->f.size() == cost.rows() && warm->g.size() == cost.cols()) {
    try {
      return solve(cost, options, warm);
    } catch (const NumericError&) {
      // Stale potentials can starve a kernel row or column; start cold.
    }
  }
  return solve(cost, options, nullptr);
}

}  // namespace gite::balance

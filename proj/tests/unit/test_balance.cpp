#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gite/ag/gradcheck.hpp"
#include "gite/ag/ops.hpp"
#include "gite/balance/pfor.hpp"
#include "gite/balance/proxy.hpp"
#include "gite/balance/sinkhorn.hpp"
#include "gite/error.hpp"

using namespace gite;
using ag::Tensor;

namespace {

Tensor random(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Exact optimum over permutation matrices scaled by 1/n, the vertices of
/// the transport polytope for uniform square marginals.
double lp_optimum(const Tensor& d) {
  std::vector<std::size_t> perm(d.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += d(i, perm[i]);
    best = std::min(best, s / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(Sinkhorn, ZeroCostGivesProductPlan) {
  const balance::SinkhornPlan p = balance::sinkhorn(Tensor(3, 4));
  EXPECT_EQ(p.cost, 0.0);
  for (double v : p.plan.data()) EXPECT_NEAR(v, 1.0 / 12.0, 1e-15);
}

TEST(Sinkhorn, SingleCell) {
  const balance::SinkhornPlan p = balance::sinkhorn(Tensor::scalar(2.5));
  EXPECT_NEAR(p.plan[0], 1.0, 1e-15);
  EXPECT_NEAR(p.cost, 2.5, 1e-14);
}

TEST(Sinkhorn, MarginalsOnRandomCosts) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Tensor d = random(10, 10, seed, 0.0, 2.0);
    balance::SinkhornOptions opt;
    opt.max_iter = 5000;
    const balance::SinkhornPlan p = balance::sinkhorn(d, opt);
    ASSERT_TRUE(p.converged);
    for (std::size_t i = 0; i < 10; ++i) {
      double row = 0.0, col = 0.0;
      for (std::size_t j = 0; j < 10; ++j) {
        row += p.plan(i, j);
        col += p.plan(j, i);
      }
      EXPECT_NEAR(row, 0.1, 1e-6);
      EXPECT_NEAR(col, 0.1, 1e-6);
    }
    EXPECT_GE(p.cost, 0.0);
  }
}

TEST(Sinkhorn, SmallXiApproachesLinearProgram) {
  balance::SinkhornOptions opt;
  opt.xi = 1e-3;
  opt.max_iter = 100000;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Tensor d = random(3, 3, seed, 0.0, 1.0);
    EXPECT_NEAR(balance::sinkhorn(d, opt).cost, lp_optimum(d), 1e-2) << "seed " << seed;
  }
}

TEST(Sinkhorn, WarmStartReachesSamePlan) {
  const Tensor d = random(6, 8, 3, 0.0, 3.0);
  balance::SinkhornOptions opt;
  opt.tol = 1e-12;
  opt.max_iter = 10000;
  const balance::SinkhornPlan cold = balance::sinkhorn(d, opt);
  const balance::SinkhornPlan warm = balance::sinkhorn(d, opt, &cold.potentials);
  EXPECT_LE(warm.iterations, 2u);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(warm.plan[k], cold.plan[k], 1e-12);
}

TEST(Sinkhorn, StalePotentialsFallBackToColdStart) {
  const Tensor d = random(5, 5, 4, 0.0, 1.0);
  balance::Potentials stale{std::vector<double>(5, 500.0), std::vector<double>(5, -500.0)};
  const balance::SinkhornPlan p = balance::sinkhorn(d, {}, &stale);
  EXPECT_TRUE(p.converged);
}

TEST(Sinkhorn, RejectsBadInput) {
  Tensor d(2, 2);
  d[1] = NAN;
  EXPECT_THROW(balance::sinkhorn(d), NumericError);
  balance::SinkhornOptions opt;
  opt.xi = 0.0;
  EXPECT_THROW(balance::sinkhorn(Tensor(2, 2), opt), ConfigError);
}

TEST(Sinkhorn, TinyXiDoesNotUnderflow) {
  balance::SinkhornOptions opt;
  opt.xi = 1e-4;
  opt.max_iter = 20000;
  const balance::SinkhornPlan p = balance::sinkhorn(random(4, 4, 5, 0.0, 50.0), opt);
  EXPECT_TRUE(p.plan.all_finite());
}

TEST(Pfor, ZeroOutcomeWeightIsSquaredDistance) {
  ag::Tape t;
  const Tensor r1 = random(2, 3, 1), r0 = random(3, 3, 2);
  const Tensor c = balance::pfor_cost(t.constant(r1), t.constant(r0), t.constant(random(2, 1, 3)),
                                      t.constant(random(3, 1, 4)), t.constant(random(3, 1, 5)),
                                      t.constant(random(2, 1, 6)), 0.0)
                       .value();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += (r1(i, k) - r0(j, k)) * (r1(i, k) - r0(j, k));
      EXPECT_NEAR(c(i, j), s, 1e-15);
    }
}

TEST(Pfor, MatchingPairHasZeroCost) {
  ag::Tape t;
  const Tensor r = Tensor(1, 2, {0.3, -0.2});
  const Tensor c = balance::pfor_cost(t.constant(r), t.constant(r), t.constant(Tensor::scalar(1.5)),
                                      t.constant(Tensor::scalar(-0.5)), t.constant(Tensor::scalar(1.5)),
                                      t.constant(Tensor::scalar(-0.5)), 2.0)
                       .value();
  EXPECT_EQ(c[0], 0.0);
}

TEST(Pfor, HandComputedTwoByTwo) {
  ag::Tape t;
  const Tensor r1(2, 1, {0.0, 1.0}), r0(2, 1, {2.0, -1.0});
  const Tensor y1 = Tensor::column({1.0, 2.0}), y0 = Tensor::column({0.0, 3.0});
  const Tensor yhat1_control = Tensor::column({0.5, 1.0}), yhat0_treated = Tensor::column({1.0, -1.0});
  const Tensor c = balance::pfor_cost(t.constant(r1), t.constant(r0), t.constant(y1), t.constant(y0),
                                      t.constant(yhat1_control), t.constant(yhat0_treated), 0.5)
                       .value();
  // D_ij = (r1_i - r0_j)^2 + 0.5 ((y1_i - yhat1_j)^2 + (yhat0_i - y0_j)^2)
  EXPECT_DOUBLE_EQ(c(0, 0), 4.0 + 0.5 * (0.25 + 1.0));
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0 + 0.5 * (0.0 + 4.0));
  EXPECT_DOUBLE_EQ(c(1, 0), 1.0 + 0.5 * (2.25 + 1.0));
  EXPECT_DOUBLE_EQ(c(1, 1), 4.0 + 0.5 * (1.0 + 16.0));
}

TEST(Transport, EnvelopeGradientMatchesFiniteDifferences) {
  ag::Parameter a{"a", random(4, 3, 7)}, b{"b", random(4, 3, 8)};
  balance::SinkhornOptions opt;
  opt.tol = 1e-14;
  opt.max_iter = 100000;
  const auto r = ag::check_gradient("w", {&a, &b}, [&](ag::Tape& t) {
    const ag::Var d = ag::pairwise_sq_dist(t.leaf(a), t.leaf(b));
    const balance::SinkhornPlan p = balance::sinkhorn(d.value(), opt);
    double h = 0.0;
    for (double v : p.plan.data()) h -= v * (std::log(v) - 1.0);
    return ag::add_scalar(ag::frobenius_dot(d, p.plan), -opt.xi * h);
  });
  EXPECT_LT(r.max_error, 1e-3);
}

TEST(Proxy, IdentityProjectionOfNormalizedRows) {
  ag::Rng rng(1);
  balance::Proxy proxy(balance::ProxyKind::projection, 4, 4, 4, rng);
  Tensor eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  proxy.network().weights()[0].value = eye;
  proxy.network().biases()[0].value.fill(0.0);
  const Tensor r(2, 4, {1.0, -1.0, 1.0, -1.0, 1.5, -0.5, -1.5, 0.5});
  // Row 1 has variance 1.25; rescale it to unit variance.
  Tensor normalized = r;
  for (std::size_t j = 0; j < 4; ++j) normalized(1, j) /= std::sqrt(1.25);
  ag::Tape t;
  const Tensor out = proxy.forward(t, t.constant(normalized)).value();
  for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out[k], normalized[k], 1e-5);
}

TEST(Proxy, MlpWidths) {
  ag::Rng rng(1);
  balance::Proxy proxy(balance::ProxyKind::mlp, 6, 6, 5, rng);
  const auto& w = proxy.network().weights();
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].value.shape(), (std::array<std::size_t, 2>{6, 5}));
  EXPECT_EQ(w[1].value.shape(), (std::array<std::size_t, 2>{5, 10}));
  EXPECT_EQ(w[2].value.shape(), (std::array<std::size_t, 2>{10, 6}));
}

TEST(Proxy, ReconstructionLoss) {
  ag::Tape t;
  const Tensor r = random(5, 3, 9), q = random(5, 3, 10);
  EXPECT_EQ(balance::reconstruction_loss(t.constant(r), t.constant(r)).value().item(), 0.0);
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) s += (r[k] - q[k]) * (r[k] - q[k]);
  EXPECT_NEAR(balance::reconstruction_loss(t.constant(r), t.constant(q)).value().item(), s / 5.0, 1e-15);
}

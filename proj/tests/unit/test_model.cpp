#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gite/balance/sinkhorn.hpp"
#include "gite/error.hpp"
#include "gite/log.hpp"
#include "gite/model/checkpoint.hpp"
#include "gite/model/gite_model.hpp"

using namespace gite;
using ag::Tensor;
using model::Variant;

namespace {

Tensor random(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Small dataset with every node in training unless `train` is given.
data::Dataset toy(std::size_t n, std::vector<graph::Edge> edges, std::uint64_t seed = 1,
                  std::vector<std::size_t> train = {}) {
  std::mt19937_64 rng(seed);
  data::Dataset d;
  d.graph = graph::DirectedGraph::from_edge_list(edges, n);
  d.covariates = random(n, 3, rng);
  d.treatments = Tensor(n, 1);
  for (std::size_t i = 0; i < n; i += 2) d.treatments[i] = 1.0;
  d.outcomes = random(n, 1, rng, -2.0, 2.0);
  if (train.empty()) {
    for (std::size_t i = 0; i < n; ++i) train.push_back(i);
  }
  d.split.train = train;
  return d;
}

std::vector<graph::Edge> ring(std::size_t n) {
  std::vector<graph::Edge> e;
  for (std::size_t i = 0; i < n; ++i) {
    e.push_back({i, (i + 1) % n});
    e.push_back({(i + 2) % n, i});
  }
  return e;
}

model::ModelConfig small(Variant v = Variant::full) {
  model::ModelConfig c;
  c.variant = v;
  c.layers = 2;
  c.hidden = 5;
  c.proxy_width = 4;
  c.seed = 9;
  return c;
}

double loss_of(model::GiteModel& m, const data::Dataset& d) {
  ag::Tape t;
  return m.loss(t, d, nullptr, false).total.value().item();
}

}  // namespace

TEST(Heads, ZeroWeightsPredictBias) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(), d);
  for (int t : {0, 1}) {
    for (auto& w : m.head(t).weights()) w.value.fill(0.0);
    m.head(t).biases().back().value = Tensor::scalar(t == 0 ? -0.75 : 1.25);
  }
  const model::Predictions p = m.predict(d);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(p.y0[i], -0.75);
    EXPECT_EQ(p.y1[i], 1.25);
  }
}

TEST(Heads, CopiedHeadsGiveZeroEffect) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(), d);
  m.head(1).weights() = m.head(0).weights();
  m.head(1).biases() = m.head(0).biases();
  const model::Predictions p = m.predict(d);
  for (double t : p.tau.data()) EXPECT_EQ(t, 0.0);
}

TEST(Heads, ShiftedHeadGivesConstantEffect) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(), d);
  m.head(1).weights() = m.head(0).weights();
  m.head(1).biases() = m.head(0).biases();
  m.head(1).biases().back().value[0] += 0.3;
  const model::Predictions p = m.predict(d);
  for (double t : p.tau.data()) EXPECT_NEAR(t, 0.3, 1e-12);
}

TEST(Heads, EffectIsHeadDifference) {
  const data::Dataset d = toy(8, ring(8));
  model::GiteModel m(small(), d);
  const model::Predictions p = m.predict(d);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(p.tau[i], p.y1[i] - p.y0[i]);
    EXPECT_EQ(p.factual[i], d.treatments[i] == 1.0 ? p.y1[i] : p.y0[i]);
  }
}

TEST(Loss, PerfectPredictionsWithoutRegularizersIsZero) {
  data::Dataset d = toy(6, ring(6));
  model::ModelConfig c = small();
  c.beta = 0.0;
  c.lambda = 0.0;
  model::GiteModel m(c, d);
  d.outcomes = m.predict(d).factual;
  EXPECT_EQ(loss_of(m, d), 0.0);
}

TEST(Loss, ZeroParametersHaveZeroPenalty) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(), d);
  for (ag::Parameter* p : m.parameters()) p->value.fill(0.0);
  ag::Tape t;
  EXPECT_EQ(m.loss(t, d, nullptr, false).penalty, 0.0);
}

TEST(Loss, MatchesScalarOracleWithoutProxy) {
  const data::Dataset d = toy(4, {{1, 0}, {2, 0}, {3, 1}, {0, 2}, {1, 3}}, 5);
  model::ModelConfig c = small(Variant::np);
  c.beta = 0.2;
  c.lambda = 0.01;
  c.lambda_d = 0.5;
  model::GiteModel m(c, d);
  ag::Tape t;
  const model::ForwardPass f = m.forward(t, d, {});
  const Tensor& joint = f.joint.value();
  const Tensor& y0 = f.y0.value();
  const Tensor& y1 = f.y1.value();

  double mse = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double pred = d.treatments[i] == 1.0 ? y1[i] : y0[i];
    mse += (pred - d.outcomes[i]) * (pred - d.outcomes[i]);
  }
  mse /= 4.0;
  const std::vector<std::size_t> treated{0, 2}, control{1, 3};
  Tensor cost(2, 2);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t i = treated[a], j = control[b];
      double s = 0.0;
      for (std::size_t k = 0; k < joint.cols(); ++k) s += (joint(i, k) - joint(j, k)) * (joint(i, k) - joint(j, k));
      const double e1 = d.outcomes[i] - y1[j], e0 = y0[i] - d.outcomes[j];
      cost(a, b) = s + 0.5 * (e1 * e1 + e0 * e0);
    }
  const balance::SinkhornPlan plan = balance::sinkhorn(cost, c.sinkhorn);
  double w = 0.0;
  for (std::size_t k = 0; k < 4; ++k) w += cost[k] * plan.plan[k];
  double norm = 0.0;
  for (ag::Parameter* p : m.parameters())
    for (double v : p->value.data()) norm += v * v;

  ag::Tape t2;
  const model::LossTerms terms = m.loss(t2, d, nullptr, false);
  EXPECT_NEAR(terms.factual, mse, 1e-12);
  EXPECT_NEAR(terms.balance, w, 1e-9);
  EXPECT_NEAR(terms.penalty, norm, 1e-10);
  EXPECT_NEAR(terms.total.value().item(), mse + 0.2 * w + 0.01 * norm, 1e-9);
}

TEST(Loss, SingleGroupSkipsBalancing) {
  const data::Dataset d = toy(6, ring(6), 1, {0, 2, 4});
  model::GiteModel m(small(), d);
  std::vector<std::string> warnings;
  auto old = log::set_warning_sink([&](std::string_view s) { warnings.emplace_back(s); });
  ag::Tape t;
  const model::LossTerms terms = m.loss(t, d, nullptr, false);
  log::set_warning_sink(old);
  EXPECT_TRUE(terms.balance_skipped);
  EXPECT_EQ(terms.balance, 0.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(Variants, NoBalancingDropsTransportTerm) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(Variant::nb), d);
  ag::Tape t;
  const model::LossTerms terms = m.loss(t, d, nullptr, false);
  EXPECT_EQ(terms.balance, 0.0);
  EXPECT_EQ(terms.sinkhorn_iterations, 0u);
}

TEST(Variants, NoRegularizationDropsPenalty) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(Variant::nr), d);
  ag::Tape t;
  EXPECT_EQ(m.loss(t, d, nullptr, false).penalty, 0.0);
}

TEST(Variants, NoAmplifierEqualsZeroPiEtaBitwise) {
  const data::Dataset d = toy(7, ring(7));
  model::ModelConfig full = small(Variant::full);
  full.pi_eta = 0.0;
  model::GiteModel a(full, d), b(small(Variant::nm), d);
  const model::Predictions pa = a.predict(d), pb = b.predict(d);
  EXPECT_EQ(pa.y0, pb.y0);
  EXPECT_EQ(pa.y1, pb.y1);
}

TEST(Variants, SeparateBalancingAgreesWithoutBalancing) {
  const data::Dataset d = toy(6, ring(6));
  model::ModelConfig c = small(Variant::full), s = small(Variant::bs);
  c.beta = s.beta = 0.0;
  model::GiteModel a(c, d), b(s, d);
  EXPECT_EQ(loss_of(a, d), loss_of(b, d));
}

TEST(Variants, SumAggregationInflatesActivations) {
  std::vector<graph::Edge> dense;
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = 0; b < 10; ++b)
      if (a != b) dense.push_back({a, b});
  const data::Dataset d = toy(10, dense);
  auto peak = [&](Variant v) {
    model::GiteModel m(small(v), d);
    ag::Tape t;
    const model::ForwardPass f = m.forward(t, d, {});
    double mx = 0.0;
    for (double x : f.state.covariate.value().data()) mx = std::max(mx, std::abs(x));
    return mx;
  };
  EXPECT_GT(peak(Variant::na), peak(Variant::full));
}

TEST(Variants, InitializationSharedAcrossVariants) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel a(small(Variant::full), d), b(small(Variant::v), d);
  EXPECT_EQ(a.head(0).weights()[0].value, b.head(0).weights()[0].value);
  EXPECT_EQ(a.nim_layers()[1].covariate_in.value, b.nim_layers()[1].covariate_in.value);
}

TEST(Variants, ParseAndNames) {
  for (Variant v : model::all_variants()) {
    EXPECT_EQ(model::parse_variant(model::to_string(v)), v);
    EXPECT_EQ(model::parse_variant(model::display_name(v)), v);
  }
  EXPECT_THROW(model::parse_variant("gite_zz"), ConfigError);
}

TEST(Normalization, EffectIsConsistentWithOutcomeScale) {
  data::Dataset d = toy(8, ring(8));
  for (double& y : d.outcomes.data()) y = 40.0 + 25.0 * y;
  model::ModelConfig c = small();
  c.zscore_outcomes = true;
  model::GiteModel m(c, d);
  ASSERT_TRUE(m.outcome_scale().enabled);
  const model::Predictions p = m.predict(d);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(p.tau[i], p.y1[i] - p.y0[i], 1e-12);
}

TEST(Config, RoundTrip) {
  model::ModelConfig c = small(Variant::bs);
  c.attention = layers::AttentionForm::qk;
  c.pi_eta_learnable = true;
  c.beta = 0.07;
  config::KeyValue kv;
  c.write(kv);
  config::KeyValue again;
  model::ModelConfig::read(kv).write(again);
  EXPECT_EQ(kv.serialize(), again.serialize());
}

TEST(Config, RejectsNegativeWeights) {
  config::KeyValue kv;
  kv.set("model.beta", -0.1);
  EXPECT_THROW(model::ModelConfig::read(kv), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const data::Dataset d = toy(6, ring(6));
  model::ModelConfig c = small(Variant::v);
  c.pi_eta_learnable = true;
  c.zscore_outcomes = true;
  model::GiteModel m(c, d);
  std::ostringstream first;
  model::write_checkpoint(first, m);
  std::istringstream in(first.str());
  model::GiteModel back = model::read_checkpoint(in, d);
  std::ostringstream second;
  model::write_checkpoint(second, back);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(m.predict(d).tau, back.predict(d).tau);
}

TEST(Checkpoint, RejectsBadMagic) {
  const data::Dataset d = toy(6, ring(6));
  std::istringstream in("NOT-A-CHECKPOINT\n");
  EXPECT_THROW(model::read_checkpoint(in, d), IngestError);
}

TEST(Checkpoint, RejectsOtherTrainingSplit) {
  const data::Dataset d = toy(6, ring(6));
  model::GiteModel m(small(), d);
  std::ostringstream out;
  model::write_checkpoint(out, m);
  const data::Dataset other = toy(6, ring(6), 1, {0, 1, 2});
  std::istringstream in(out.str());
  EXPECT_THROW(model::read_checkpoint(in, other), IngestError);
}

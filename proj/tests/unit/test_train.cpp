#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gite/data/simulate.hpp"
#include "gite/error.hpp"
#include "gite/train/adam.hpp"
#include "gite/train/fit.hpp"
#include "gite/train/parallel.hpp"

using namespace gite;
using ag::Tensor;

namespace {

data::Dataset sim(std::size_t n, std::uint64_t seed) {
  data::SimConfig c;
  c.n = n;
  c.covariates = 10;
  c.mean_degree = 6.0;
  c.noise_std = 0.1;
  c.standardize_agg = true;
  c.agg_outcome_scale = 1.0;
  c.seed = seed;
  return data::simulate(c);
}

model::ModelConfig small(std::uint64_t seed = 3) {
  model::ModelConfig c;
  c.layers = 2;
  c.hidden = 8;
  c.proxy_width = 8;
  c.zscore_outcomes = true;
  c.seed = seed;
  return c;
}

std::vector<Tensor> values(model::GiteModel& m) {
  std::vector<Tensor> out;
  for (ag::Parameter* p : m.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST(Adam, ZeroGradientWithoutDecayKeepsParameters) {
  ag::Parameter p{"p", Tensor(2, 3, {1, 2, 3, 4, 5, 6})};
  const Tensor before = p.value;
  train::AdamOptions o;
  o.weight_decay = 0.0;
  train::Adam adam({&p}, o);
  for (int i = 0; i < 5; ++i) adam.step({Tensor(2, 3)});
  EXPECT_EQ(p.value, before);
  EXPECT_EQ(adam.steps(), 5u);
}

TEST(Adam, ZeroLearningRateKeepsParameters) {
  ag::Parameter p{"p", Tensor(1, 2, {0.5, -0.5})};
  const Tensor before = p.value;
  train::AdamOptions o;
  o.learning_rate = 0.0;
  train::Adam adam({&p}, o);
  adam.step({Tensor(1, 2, {3.0, -7.0})});
  EXPECT_EQ(p.value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ag::Parameter p{"p", Tensor(1, 2, {0.0, 0.0})};
  train::AdamOptions o;
  o.weight_decay = 0.0;
  o.learning_rate = 0.1;
  train::Adam adam({&p}, o);
  adam.step({Tensor(1, 2, {2.0, -0.01})});
  EXPECT_NEAR(p.value[0], -0.1, 1e-6);
  EXPECT_NEAR(p.value[1], 0.1, 1e-5);
}

TEST(Adam, DecoupledDecayShrinksParameters) {
  ag::Parameter p{"p", Tensor::scalar(2.0)};
  train::AdamOptions o;
  o.learning_rate = 0.1;
  o.weight_decay = 0.5;
  train::Adam adam({&p}, o);
  adam.step({Tensor::scalar(0.0)});
  EXPECT_NEAR(p.value[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-12);
}

TEST(Adam, GradientCountMismatchThrows) {
  ag::Parameter p{"p", Tensor::scalar(1.0)};
  train::Adam adam({&p}, {});
  EXPECT_ANY_THROW(adam.step({}));
}

TEST(Fit, ZeroIterationsKeepsInitialization) {
  const data::Dataset d = sim(100, 1);
  model::GiteModel m(small(), d);
  const std::vector<Tensor> before = values(m);
  train::TrainConfig t;
  t.max_iterations = 0;
  const train::History h = train::fit(m, d, t);
  EXPECT_EQ(h.iterations, 0u);
  EXPECT_EQ(values(m), before);
}

TEST(Fit, BitwiseReproducible) {
  const data::Dataset d = sim(120, 2);
  train::TrainConfig t;
  t.max_iterations = 15;
  t.validate_every = 5;
  t.seed = 4;
  model::GiteModel a(small(), d), b(small(), d);
  const train::History ha = train::fit(a, d, t), hb = train::fit(b, d, t);
  EXPECT_EQ(ha.loss, hb.loss);
  EXPECT_EQ(values(a), values(b));
}

TEST(Fit, LossDecreasesOnSmallGraphs) {
  std::size_t descended = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const data::Dataset d = sim(200, seed);
    model::GiteModel m(small(seed), d);
    train::TrainConfig t;
    t.max_iterations = 60;
    t.patience = 0;
    t.adam.learning_rate = 5e-3;
    t.seed = seed;
    const train::History h = train::fit(m, d, t);
    if (h.loss.back() < h.loss.front()) ++descended;
  }
  EXPECT_GE(descended, 9u);
}

TEST(Fit, KeepsBestValidationParameters) {
  const data::Dataset d = sim(120, 3);
  model::GiteModel m(small(), d);
  train::TrainConfig t;
  t.max_iterations = 20;
  t.validate_every = 5;
  t.patience = 0;
  const train::History h = train::fit(m, d, t);
  ASSERT_TRUE(h.best_validation);
  EXPECT_NEAR(train::evaluate(m, d, data::Part::val).sqrt_mse, *h.best_validation, 1e-12);
}

TEST(Fit, RejectsZeroValidationInterval) {
  const data::Dataset d = sim(100, 1);
  model::GiteModel m(small(), d);
  train::TrainConfig t;
  t.validate_every = 0;
  EXPECT_THROW(train::fit(m, d, t), ConfigError);
}

TEST(Evaluate, EffectErrorAbsentWithoutTruth) {
  data::Dataset d = sim(100, 1);
  d.tau.reset();
  model::GiteModel m(small(), d);
  const metrics::MetricsRecord r = train::evaluate(m, d, data::Part::test);
  EXPECT_FALSE(r.sqrt_pehe);
  EXPECT_EQ(r.split, "test");
}

TEST(Grid, ValidatesRanges) {
  train::Grid g;
  g.beta = {0.1};
  g.lambda_d = {0.5, 10.0};
  EXPECT_NO_THROW(g.validate());
  g.beta = {0.3};
  EXPECT_THROW(g.validate(), ConfigError);
  g.beta = {0.1};
  g.lambda_d = {2.0};
  EXPECT_THROW(g.validate(), ConfigError);
  g.lambda_d = {};
  g.lambda_p = {0.0};
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Grid, ExpandsCartesianProduct) {
  train::Grid g;
  g.beta = {0.01, 0.1};
  g.lambda = {0.001, 0.01, 0.1};
  const auto cells = g.expand(small());
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[4].beta, 0.1);
  EXPECT_EQ(cells[4].lambda, 0.01);
  EXPECT_EQ(cells[4].lambda_d, small().lambda_d);
}

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<int> hits(50, 0);
  train::parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(train::parallel_for(8, 3,
                                   [](std::size_t i) {
                                     if (i == 5) throw NumericError("boom");
                                   }),
               NumericError);
}

TEST(TrainConfigKeys, RoundTrip) {
  train::TrainConfig t;
  t.adam.learning_rate = 0.02;
  t.patience = 3;
  t.seed = 99;
  config::KeyValue kv, again;
  t.write(kv);
  train::TrainConfig::read(kv).write(again);
  EXPECT_EQ(kv.serialize(), again.serialize());
}

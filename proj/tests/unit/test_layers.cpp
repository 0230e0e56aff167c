#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gite/ag/ops.hpp"
#include "gite/graph/directed_graph.hpp"
#include "gite/layers/attention.hpp"
#include "gite/layers/mlp.hpp"
#include "gite/layers/nim.hpp"

using namespace gite;
using ag::Tensor;
using layers::AttentionForm;

namespace {

graph::DirectedGraph make(std::vector<graph::Edge> edges, std::size_t n) {
  return graph::DirectedGraph::from_edge_list(edges, n);
}

Tensor random(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

std::vector<double> weights_of(layers::PartialAttention& att, const Tensor& p,
                               const std::shared_ptr<const ag::EdgeList>& edges) {
  ag::Tape t;
  const Tensor w = att.weights(t, t.constant(p), edges).value();
  return {w.data().begin(), w.data().end()};
}

}  // namespace

TEST(Mlp, ZeroParametersGiveZeros) {
  ag::Rng rng(1);
  layers::Mlp mlp("m", {3, 4, 2}, false, rng);
  for (auto& w : mlp.weights()) w.value.fill(0.0);
  for (auto& b : mlp.biases()) b.value.fill(0.0);
  ag::Tape t;
  EXPECT_EQ(mlp.forward(t, t.constant(random(5, 3, 2))).value(), Tensor(5, 2));
}

TEST(Mlp, IdentityLayerAppliesRelu) {
  ag::Rng rng(1);
  layers::Mlp mlp("m", {2, 2}, true, rng);
  mlp.weights()[0].value = Tensor(2, 2, {1.0, 0.0, 0.0, 1.0});
  mlp.biases()[0].value.fill(0.0);
  ag::Tape t;
  const Tensor y = mlp.forward(t, t.constant(Tensor(2, 2, {0.5, -1.0, -2.0, 3.0}))).value();
  EXPECT_EQ(y, Tensor(2, 2, {0.5, 0.0, 0.0, 3.0}));
}

TEST(Mlp, InitializationIsFanInBounded) {
  ag::Rng rng(4);
  layers::Mlp mlp("m", {25, 16, 1}, false, rng);
  for (auto& w : mlp.weights()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.value.rows()));
    for (double v : w.value.data()) EXPECT_LE(std::abs(v), bound);
  }
}

class StructureEncoder : public ::testing::Test {
 protected:
  /// One GIN step with a 1x1 identity weight and eps = 0.
  Tensor step(const graph::DirectedGraph& g) {
    ag::Rng rng(0);
    layers::NimLayer layer("l", 1, 1, 1, 1, AttentionForm::gat, rng);
    layer.structure_weight.value = Tensor::scalar(1.0);
    ag::Tape t;
    const layers::NimState s0 = layers::initial_state(t, Tensor(g.num_nodes(), 1), Tensor(g.num_nodes(), 1));
    return layer.forward(t, s0, g, {}, nullptr).structure.value();
  }
};

TEST_F(StructureEncoder, IsolatedNodeKeepsOne) { EXPECT_EQ(step(make({}, 1))[0], 1.0); }

TEST_F(StructureEncoder, TwoInNeighborsGiveThree) {
  const Tensor z = step(make({{1, 0}, {2, 0}}, 3));
  EXPECT_EQ(z[0], 3.0);
  EXPECT_EQ(z[1], 1.0);
}

TEST_F(StructureEncoder, DegreesAreDistinguished) {
  const Tensor z = step(make({{1, 0}, {2, 0}, {0, 3}}, 4));
  EXPECT_NE(z[0], z[3]);
}

TEST(Attention, QkUnitDotProduct) {
  ag::Rng rng(1);
  layers::PartialAttention att("a", 1, 1, AttentionForm::qk, rng);
  att.parameters()[0].value = Tensor::scalar(1.0);
  att.parameters()[1].value = Tensor::scalar(1.0);
  const auto g = make({{1, 0}}, 2);
  ag::Tape t;
  const Tensor s = att.scores(t, t.constant(Tensor(2, 1, 1.0)), g.aggregation_edges()).value();
  for (double v : s.data()) EXPECT_EQ(v, 1.0);
}

TEST(Attention, ZeroGatVectorIsUniform) {
  ag::Rng rng(1);
  layers::PartialAttention att("a", 3, 4, AttentionForm::gat, rng);
  att.parameters()[1].value.fill(0.0);
  att.parameters()[2].value.fill(0.0);
  const auto g = make({{1, 0}, {2, 0}, {3, 0}}, 4);
  const auto edges = g.aggregation_edges();
  const auto w = weights_of(att, random(4, 3, 5), edges);
  for (std::size_t e = edges->offsets[0]; e < edges->offsets[1]; ++e) EXPECT_DOUBLE_EQ(w[e], 0.25);
}

TEST(Attention, SoftmaxClosedForms) {
  ag::Tape t;
  const Tensor one = ag::softmax_over_group(t.constant(Tensor::scalar(3.7)), {0}, 1).value();
  EXPECT_EQ(one[0], 1.0);
  const Tensor half = ag::softmax_over_group(t.constant(Tensor::column({0.3, 0.3})), {0, 0}, 1).value();
  EXPECT_EQ(half[0], 0.5);
  EXPECT_EQ(half[1], 0.5);
  const Tensor thirds =
      ag::softmax_over_group(t.constant(Tensor::column({std::log(2.0), 0.0})), {0, 0}, 1).value();
  EXPECT_NEAR(thirds[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(thirds[1], 1.0 / 3.0, 1e-15);
}

TEST(Attention, GatMatchesScalarOracle) {
  ag::Rng rng(7);
  layers::PartialAttention att("a", 3, 2, AttentionForm::gat, rng);
  const auto g = make({{1, 0}, {2, 0}, {0, 1}, {2, 1}, {1, 2}}, 3);
  const auto edges = g.aggregation_edges();
  const Tensor p = random(3, 3, 8);
  const auto w = weights_of(att, p, edges);
  const Tensor& W = att.parameters()[0].value;
  const Tensor& a_dst = att.parameters()[1].value;
  const Tensor& a_src = att.parameters()[2].value;
  auto h = [&](std::size_t node, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += p(node, k) * W(k, j);
    return s;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> score;
    for (std::size_t e = edges->offsets[i]; e < edges->offsets[i + 1]; ++e) {
      double s = 0.0;
      for (std::size_t j = 0; j < 2; ++j) s += a_dst[j] * h(i, j) + a_src[j] * h(edges->src[e], j);
      score.push_back(s > 0 ? s : 0.2 * s);
    }
    double z = 0.0;
    for (double s : score) z += std::exp(s);
    for (std::size_t k = 0; k < score.size(); ++k)
      EXPECT_NEAR(w[edges->offsets[i] + k], std::exp(score[k]) / z, 1e-14);
  }
}

TEST(Attention, QkMatchesScalarOracle) {
  ag::Rng rng(9);
  layers::PartialAttention att("a", 3, 4, AttentionForm::qk, rng);
  const auto g = make({{1, 0}, {2, 0}, {0, 2}}, 3);
  const auto edges = g.aggregation_edges();
  const Tensor p = random(3, 3, 10);
  ag::Tape t;
  const Tensor s = att.scores(t, t.constant(p), edges).value();
  const Tensor& Wq = att.parameters()[0].value;
  const Tensor& Wk = att.parameters()[1].value;
  for (std::size_t e = 0; e < edges->num_edges(); ++e) {
    double dot = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      double q = 0.0, k = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        q += p(edges->dst[e], c) * Wq(c, j);
        k += p(edges->src[e], c) * Wk(c, j);
      }
      dot += q * k;
    }
    EXPECT_NEAR(s[e], dot / 2.0, 1e-14);
  }
}

TEST(SummaryWeight, HalfIsFixedPoint) { EXPECT_EQ(layers::summary_weight(0.5), 0.5); }

TEST(SummaryWeight, StrictlyInsideUnitInterval) {
  for (double a = -15.0; a <= 15.0; a += 0.25) {
    const double p = layers::summary_weight(a);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_NEAR(p + layers::summary_weight(1.0 - a), 1.0, 1e-15);
  }
}

TEST(Amplifier, ZeroPiIsIdentity) {
  layers::Amplifier amp({3, 1, 5}, {0, 1, 2}, 0.0, false);
  ag::Tape t;
  const Tensor z = random(3, 4, 1);
  EXPECT_EQ(amp.apply(t, t.constant(z)).value(), z);
}

TEST(Amplifier, DegreeOneNodeUnchanged) {
  layers::Amplifier amp({3, 1, 5}, {0, 1, 2}, 1.0, false);
  ag::Tape t;
  const Tensor z = random(3, 4, 2);
  const Tensor out = amp.apply(t, t.constant(z)).value();
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out(1, j), z(1, j));
}

TEST(Amplifier, RatioFollowsLogDegrees) {
  const std::size_t m = 3, n = 8;
  layers::Amplifier amp({m, n, 2, 2}, {0, 1, 2}, 1.0, false);
  const double d = std::log(3.0) + std::log(8.0) + std::log(2.0);
  ag::Tape t;
  const Tensor out = amp.apply(t, t.constant(Tensor(4, 1, 1.0))).value();
  EXPECT_NEAR(out[0] / out[1], (1 + std::log(3.0) / d) / (1 + std::log(8.0) / d), 1e-15);
  EXPECT_DOUBLE_EQ(amp.denominator(), d);
}

TEST(Amplifier, AllDegreeOneDisables) {
  layers::Amplifier amp({1, 1}, {0, 1}, 1.0, false);
  EXPECT_FALSE(amp.enabled());
}

class NimFixture : public ::testing::Test {
 protected:
  graph::DirectedGraph g = make({{1, 0}, {2, 0}, {0, 1}, {2, 1}, {0, 2}}, 3);
  Tensor x = random(3, 2, 21);
  Tensor treat = Tensor::column({1.0, 0.0, 1.0});
  ag::Rng rng{22};
  layers::NimLayer layer{"l", 2, 1, 1, 3, AttentionForm::gat, rng};

  /// Outputs stay valid until the next call.
  layers::NimState run(const layers::NimWiring& wiring, layers::Amplifier* amp,
                       std::vector<layers::AttentionRecord>* records = nullptr) {
    tape_.reset();
    return layer.forward(tape_, layers::initial_state(tape_, x, treat), g, wiring, amp, records);
  }
  ag::Tape tape_;
};

TEST_F(NimFixture, EqualBranchesMakeSummaryWeightIrrelevant) {
  // Uniform weighting gives both branches the same weights.
  layer.covariate_st.value = layer.covariate_in.value;
  layers::NimWiring uniform{layers::Weighting::uniform, true, false};
  layer.covariate_mix.value = Tensor::scalar(-3.0);
  const Tensor a = run(uniform, nullptr).covariate.value();
  layer.covariate_mix.value = Tensor::scalar(4.0);
  const Tensor b = run(uniform, nullptr).covariate.value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST_F(NimFixture, MatchesHandRolledDualAggregation) {
  std::vector<layers::AttentionRecord> rec;
  const layers::NimState out = run({}, nullptr, &rec);
  ASSERT_EQ(rec.size(), 4u);
  const Tensor& a_in = rec[0].weights.value();
  const Tensor& a_st = rec[1].weights.value();
  const auto edges = g.aggregation_edges();
  const double pi = layers::summary_weight(layer.covariate_mix.value[0]);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double in = 0.0, st = 0.0;
      for (std::size_t e = edges->offsets[i]; e < edges->offsets[i + 1]; ++e) {
        double m_in = 0.0, m_st = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
          m_in += x(edges->src[e], c) * layer.covariate_in.value(c, j);
          m_st += x(edges->src[e], c) * layer.covariate_st.value(c, j);
        }
        in += a_in[e] * m_in;
        st += a_st[e] * m_st;
      }
      const double expect = pi * std::max(in, 0.0) + (1.0 - pi) * std::max(st, 0.0);
      EXPECT_NEAR(out.covariate.value()(i, j), expect, 1e-14);
    }
}

TEST_F(NimFixture, ZeroPiEtaMatchesNoAmplifierBitwise) {
  layers::Amplifier amp(g.deg_tilde(), {0, 1, 2}, 0.0, false);
  const layers::NimState with = run({}, &amp);
  const Tensor x_with = with.covariate.value(), t_with = with.treatment.value();
  const layers::NimState without = run({layers::Weighting::attention, true, false}, nullptr);
  EXPECT_EQ(x_with, without.covariate.value());
  EXPECT_EQ(t_with, without.treatment.value());
}

TEST_F(NimFixture, AttentionRowsSumToOne) {
  std::vector<layers::AttentionRecord> rec;
  run({}, nullptr, &rec);
  const auto edges = g.aggregation_edges();
  for (const auto& r : rec)
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0.0;
      for (std::size_t e = edges->offsets[i]; e < edges->offsets[i + 1]; ++e) s += r.weights.value()[e];
      EXPECT_NEAR(s, 1.0, 1e-12) << r.name;
    }
}

TEST(Nim, AmplifiedStarCenterDiffersFromIsolatedNode) {
  // Star with 4 leaves (nodes 1..4 -> 0) plus isolated node 5, all with the
  // same covariate vector.
  const auto g = make({{1, 0}, {2, 0}, {3, 0}, {4, 0}}, 6);
  ag::Rng rng(3);
  layers::NimLayer layer("l", 2, 1, 1, 4, AttentionForm::gat, rng);
  layers::Amplifier amp(g.deg_tilde(), {0, 1, 2, 3, 4, 5}, 1.0, false);
  Tensor x(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = 0.7;
    x(i, 1) = -0.4;
  }
  ag::Tape t;
  const Tensor z = layer.forward(t, layers::initial_state(t, x, Tensor(6, 1)), g, {}, &amp).covariate.value();
  bool differs = false;
  for (std::size_t j = 0; j < 4; ++j) differs = differs || z(0, j) != z(5, j);
  EXPECT_TRUE(differs);
}

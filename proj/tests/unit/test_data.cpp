#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gite/data/dataset.hpp"
#include "gite/data/dataset_io.hpp"
#include "gite/data/simulate.hpp"
#include "gite/error.hpp"

using namespace gite;
using ag::Tensor;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gite_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// (E o A)^hops x with dense matrices, A without self-loops.
Tensor dense_propagation(const data::Dataset& d, const data::SimTrace& tr, const Tensor& signal) {
  const std::size_t n = d.num_nodes();
  const auto edges = d.graph.neighbor_edges();
  std::vector<Tensor> mats;
  for (const Tensor& w : tr.edge_weights) {
    Tensor m(n, n);
    for (std::size_t e = 0; e < edges->num_edges(); ++e) m(edges->dst[e], edges->src[e]) = w[e];
    mats.push_back(m);
  }
  Tensor h = signal;
  for (const Tensor& m : mats) {
    Tensor next(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) next[i] += m(i, k) * h[k];
    h = next;
  }
  return h;
}

double max_rel(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

}  // namespace

TEST(Split, SeventyFifteenFifteen) {
  const data::Split s = data::make_split(100, 1);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
}

TEST(Split, FloorThenRemainder) {
  const data::Split s = data::make_split(10, 1);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, DisjointExhaustiveAndSeeded) {
  const data::Split a = data::make_split(57, 9), b = data::make_split(57, 9), c = data::make_split(57, 10);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_NE(a.train, c.train);
  std::vector<int> seen(57, 0);
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (std::size_t i : *part) ++seen[i];
  for (int k : seen) EXPECT_EQ(k, 1);
}

TEST(Split, TooSmallThrows) { EXPECT_THROW(data::make_split(9, 1), ConfigError); }

TEST(Simulate, Deterministic) {
  data::SimConfig c;
  c.n = 120;
  c.seed = 4;
  const data::Dataset a = data::simulate(c), b = data::simulate(c);
  EXPECT_EQ(a.covariates, b.covariates);
  EXPECT_EQ(a.treatments, b.treatments);
  EXPECT_EQ(a.outcomes, b.outcomes);
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
}

TEST(Simulate, ZeroEffectWeights) {
  data::SimConfig c;
  c.n = 60;
  c.effect_scale = 0.0;
  const data::Dataset d = data::simulate(c);
  for (double t : d.tau->data()) EXPECT_EQ(t, 0.0);
}

TEST(Simulate, EdgeFreeGraphHasNoInterference) {
  data::SimConfig c;
  c.n = 40;
  c.mean_degree = 0.0;
  c.noise_std = 0.0;
  data::SimTrace tr;
  const data::Dataset d = data::simulate(c, &tr);
  EXPECT_EQ(d.graph.num_edges(), 0u);
  for (std::size_t i = 0; i < c.n; ++i) {
    double wx = 0.0, w1 = 0.0;
    for (std::size_t j = 0; j < c.covariates; ++j) {
      wx += d.covariates(i, j) * tr.w_outcome[j];
      w1 += d.covariates(i, j) * tr.w_effect[j];
    }
    EXPECT_NEAR(d.outcomes[i], wx + d.treatments[i] * w1, 1e-12);
    EXPECT_EQ(tr.agg_covariate[i], 0.0);
  }
}

TEST(Simulate, SparsePropagationMatchesDenseOracle) {
  for (bool resample : {false, true}) {
    data::SimConfig c;
    c.n = 50;
    c.mean_degree = 6;
    c.resample_edge_weights = resample;
    data::SimTrace tr;
    const data::Dataset d = data::simulate(c, &tr);
    EXPECT_LT(max_rel(tr.agg_covariate, dense_propagation(d, tr, tr.covariate_signal)), 1e-9);
    EXPECT_LT(max_rel(tr.agg_treatment, dense_propagation(d, tr, tr.treatment_signal)), 1e-9);
  }
}

TEST(Simulate, DegreeShareUsesAllNodes) {
  data::SimConfig c;
  c.n = 80;
  data::SimTrace tr;
  const data::Dataset d = data::simulate(c, &tr);
  double denom = 0.0;
  for (std::size_t k : d.graph.deg_tilde()) denom += std::log(static_cast<double>(k));
  for (std::size_t i = 0; i < c.n; ++i)
    EXPECT_NEAR(tr.eta[i], std::log(static_cast<double>(d.graph.deg_tilde()[i])) / denom, 1e-15);
}

TEST(Simulate, PropensityClampedAndTreatmentMixed) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    data::SimConfig c;
    c.n = 300;
    c.seed = seed;
    data::SimTrace tr;
    const data::Dataset d = data::simulate(c, &tr);
    double treated = 0.0;
    for (double t : d.treatments.data()) treated += t;
    EXPECT_GT(treated, 0.0);
    EXPECT_LT(treated, 300.0);
    for (double p : tr.propensity.data()) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(Simulate, PreferentialAttachmentMeanDegree) {
  data::SimConfig c;
  c.n = 1000;
  c.mean_degree = 10;
  std::mt19937_64 rng(1);
  const auto g = data::generate_graph(c, rng);
  const double mean_in = static_cast<double>(g.num_edges()) / 1000.0;
  EXPECT_NEAR(mean_in, 10.0, 0.5);
  std::size_t max_deg = 0;
  for (std::size_t k : g.deg_tilde()) max_deg = std::max(max_deg, k);
  EXPECT_GT(max_deg, 50u);
}

TEST(Simulate, OutcomeScaleStandardizesAggregates) {
  data::SimConfig c;
  c.n = 200;
  c.noise_std = 0.0;
  c.agg_outcome_scale = 2.0;
  data::SimTrace tr;
  const data::Dataset d = data::simulate(c, &tr);
  double mean = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    double wx = 0.0, w1 = 0.0;
    for (std::size_t j = 0; j < c.covariates; ++j) {
      wx += d.covariates(i, j) * tr.w_outcome[j];
      w1 += d.covariates(i, j) * tr.w_effect[j];
    }
    mean += d.outcomes[i] - wx - d.treatments[i] * w1;
  }
  EXPECT_NEAR(mean / 200.0, 0.0, 1e-9);
}

TEST(Ingest, RoundTripIsBitwise) {
  data::SimConfig c;
  c.n = 30;
  c.covariates = 4;
  const data::Dataset d = data::simulate(c);
  const fs::path a = fresh_dir("round_a"), b = fresh_dir("round_b");
  data::write_dataset(a, d);
  const data::Dataset back = data::ingest(data::DatasetFiles::in_directory(a));
  EXPECT_EQ(back.covariates, d.covariates);
  EXPECT_EQ(back.outcomes, d.outcomes);
  EXPECT_EQ(*back.tau, *d.tau);
  EXPECT_EQ(back.split.train, d.split.train);
  data::write_dataset(b, back);
  for (const char* f : {"edges.tsv", "covariates.csv", "outcomes.csv", "tau.csv", "split.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

class ToyFiles : public ::testing::Test {
 protected:
  fs::path dir = fresh_dir("toy");
  void SetUp() override {
    std::ofstream(dir / "edges.tsv") << "1\t0\n2\t1\n";
    std::ofstream(dir / "covariates.csv") << "id,f0,f1\n0,0.5,1\n1,-1,2\n2,0.25,0\n";
    std::ofstream(dir / "outcomes.csv") << "id,t,y\n0,1,3.5\n1,0,-1\n2,1,0.125\n";
  }
};

TEST_F(ToyFiles, ThreeNodeRoundTrip) {
  const data::Dataset d = data::ingest(data::DatasetFiles::in_directory(dir));
  EXPECT_EQ(d.num_nodes(), 3u);
  EXPECT_EQ(d.outcomes[0], 3.5);
  EXPECT_FALSE(d.tau.has_value());
  const fs::path out = fresh_dir("toy_out");
  data::write_dataset(out, d);
  const data::Dataset again = data::ingest(data::DatasetFiles::in_directory(out));
  EXPECT_EQ(again.covariates, d.covariates);
  EXPECT_EQ(again.treatments, d.treatments);
  EXPECT_EQ(again.outcomes, d.outcomes);
  EXPECT_EQ(again.graph.edges(), d.graph.edges());
}

TEST_F(ToyFiles, NonBinaryTreatmentRejected) {
  std::ofstream(dir / "outcomes.csv") << "id,t,y\n0,1,3.5\n1,2,-1\n2,1,0.125\n";
  try {
    data::ingest(data::DatasetFiles::in_directory(dir));
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST_F(ToyFiles, RowCountMismatchRejected) {
  std::ofstream(dir / "outcomes.csv") << "id,t,y\n0,1,3.5\n1,0,-1\n";
  EXPECT_THROW(data::ingest(data::DatasetFiles::in_directory(dir)), IngestError);
}

TEST_F(ToyFiles, NanCovariateRejected) {
  std::ofstream(dir / "covariates.csv") << "id,f0,f1\n0,0.5,1\n1,nan,2\n2,0.25,0\n";
  EXPECT_THROW(data::ingest(data::DatasetFiles::in_directory(dir)), IngestError);
}

TEST(ZScore, InverseRecoversOutcomes) {
  data::SimConfig c;
  c.n = 100;
  const data::Dataset d = data::simulate(c);
  const data::ZScore z = data::ZScore::fit(d.outcomes, d.split.train);
  const Tensor back = z.invert(z.apply(d.outcomes));
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back[i], d.outcomes[i], 1e-12);
}

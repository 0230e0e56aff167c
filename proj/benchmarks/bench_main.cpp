#include <benchmark/benchmark.h>

#include <random>

#include "gite/ag/ops.hpp"
#include "gite/balance/sinkhorn.hpp"
#include "gite/data/simulate.hpp"
#include "gite/model/gite_model.hpp"

using namespace gite;
using ag::Tensor;

namespace {

Tensor uniform(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

data::Dataset dataset(std::size_t n) {
  data::SimConfig c;
  c.n = n;
  c.mean_degree = 20;
  c.seed = 1;
  return data::simulate(c);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor a = uniform(n, 64, 1), b = uniform(64, 64, 2);
  for (auto _ : state) {
    ag::Tape t;
    benchmark::DoNotOptimize(ag::matmul(t.constant(a), t.constant(b)).value().data().data());
  }
}
BENCHMARK(BM_Matmul)->Arg(500)->Arg(2000);

void BM_EdgeAggregate(benchmark::State& state) {
  const data::Dataset d = dataset(static_cast<std::size_t>(state.range(0)));
  const auto edges = d.graph.aggregation_edges();
  const Tensor h = uniform(d.num_nodes(), 32, 3);
  const Tensor w = uniform(edges->num_edges(), 1, 4);
  for (auto _ : state) {
    ag::Tape t;
    const ag::Var wv = t.constant(w);
    benchmark::DoNotOptimize(ag::edge_aggregate(t.constant(h), &wv, edges).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(edges->num_edges()));
}
BENCHMARK(BM_EdgeAggregate)->Arg(500)->Arg(2000);

void BM_Sinkhorn(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor d = uniform(n, n, 5);
  balance::SinkhornOptions o;
  o.max_iter = 50;
  for (auto _ : state) benchmark::DoNotOptimize(balance::sinkhorn(d, o).cost);
}
BENCHMARK(BM_Sinkhorn)->Arg(100)->Arg(700);

void BM_LossForwardBackward(benchmark::State& state) {
  const data::Dataset d = dataset(static_cast<std::size_t>(state.range(0)));
  model::ModelConfig c;
  c.hidden = 16;
  c.proxy_width = 16;
  c.sinkhorn.max_iter = 50;
  model::GiteModel m(c, d);
  ag::Rng rng(1);
  ag::Tape t;
  for (auto _ : state) {
    t.reset();
    const model::LossTerms terms = m.loss(t, d, &rng, true);
    t.backward(terms.total);
  }
}
BENCHMARK(BM_LossForwardBackward)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

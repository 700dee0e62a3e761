// Microbenchmarks for the hot paths: UCB scoring, encode/decode,
// surrogate forward passes, and synthetic-oracle evaluation.

#include <benchmark/benchmark.h>

#include "alphax/baselines.hpp"
#include "alphax/mcts.hpp"
#include "alphax/oracle.hpp"
#include "alphax/surrogate.hpp"

using namespace alphax;

namespace {

SpaceConfig bench_space() {
  SpaceConfig cfg = SpaceConfig::make(SpaceKind::NasBenchDag);
  cfg.max_dag_nodes = 5;
  return cfg;
}

void BM_UcbScore(benchmark::State& state) {
  double q = 1.8;
  long n_sa = 2, n_s = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ucb_score(q, n_sa, n_s, 0.5));
    q += 1e-9;  // defeat constant folding
  }
}
BENCHMARK(BM_UcbScore);

void BM_EncodeDecode(benchmark::State& state) {
  SpaceConfig cfg = bench_space();
  Rng rng(1);
  ArchState s = random_terminal_walk(cfg, rng);
  for (auto _ : state) {
    EncodingVector e = encode(s);
    benchmark::DoNotOptimize(decode(cfg, e));
  }
}
BENCHMARK(BM_EncodeDecode);

void BM_MlpForward(benchmark::State& state) {
  Rng rng(2);
  const int width = static_cast<int>(state.range(0));
  Mlp net({56, {width, width}, 1}, OutputHead::Sigmoid, 0.1, rng);
  std::vector<double> x(56);
  for (double& v : x) v = uniform_real(rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_scalar(x));
}
BENCHMARK(BM_MlpForward)->Arg(16)->Arg(64)->Arg(256);

void BM_SyntheticAccuracy(benchmark::State& state) {
  SpaceConfig cfg = bench_space();
  SyntheticBench bench(cfg, SyntheticBenchConfig{});
  Rng rng(3);
  ArchState s = random_terminal_walk(cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bench.accuracy(s));
}
BENCHMARK(BM_SyntheticAccuracy);

void BM_SearchStep(benchmark::State& state) {
  SpaceConfig cfg = bench_space();
  auto eval = std::make_shared<Evaluator>(
      std::make_shared<SyntheticBench>(cfg, SyntheticBenchConfig{}));
  SearchConfig scfg;
  scfg.k = 10;
  Engine engine(cfg, scfg, std::make_shared<ConstantMeanSurrogate>(), eval,
                EngineMode::Sequential);
  for (auto _ : state) benchmark::DoNotOptimize(engine.search_step());
}
BENCHMARK(BM_SearchStep);

}  // namespace

BENCHMARK_MAIN();

// Serial reference vs OpenMP kernels. Worker count comes from GRADROUTE_WORKERS.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "gradroute/kernels.hpp"
#include "gradroute/metrics.hpp"
#include "gradroute/probe.hpp"
#include "gradroute/random.hpp"

using namespace gradroute;

namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() - 0.5;
  return v;
}

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::serial : Exec::parallel;
}

void BM_MatmulNt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto a = random_buffer(n * n, 1);
  const auto b = random_buffer(n * n, 2);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    kernels::matmul_nt(a, b, out, n, n, n, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulNt)->ArgsProduct({{0, 1}, {64, 256}});

ProbeModelConfig bench_config() {
  ProbeModelConfig c;
  c.num_layers = 2;
  c.model_dim = 64;
  c.num_heads = 4;
  c.ffn_hidden_dim = 128;
  c.vocab_size = 256;
  c.max_context = 128;
  c.rng_seed = 3;
  return c;
}

std::vector<Trajectory> bench_corpus(std::size_t count) {
  std::vector<Trajectory> out;
  SplitMix64 rng(5);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<TokenId> tokens(96);
    for (auto& t : tokens) t = static_cast<TokenId>(rng.below(256));
    out.push_back(prepare_trajectory(tokens, 32, 128, "t" + std::to_string(i)));
  }
  return out;
}

void BM_ProbeCorpus(benchmark::State& state) {
  const ProbeModel model = init_model(bench_config());
  const auto corpus = bench_corpus(8);
  for (auto _ : state) {
    auto vs = probe_corpus(model, corpus, exec_of(state));
    benchmark::DoNotOptimize(vs.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ProbeCorpus)->ArgsProduct({{0, 1}, {0}})->Unit(benchmark::kMillisecond);

void BM_ScoreCorpus(benchmark::State& state) {
  std::vector<GradientVector> vs;
  SplitMix64 rng(9);
  for (std::size_t i = 0; i < 10000; ++i) {
    GradientVector g;
    g.trajectory_id = "t" + std::to_string(i);
    for (std::size_t j = 0; j < 56; ++j) {
      g.norms.push_back(rng.uniform());
      g.group_names.push_back("g" + std::to_string(j));
      g.group_param_counts.push_back(4096);
    }
    vs.push_back(std::move(g));
  }
  for (auto _ : state) {
    auto s = score_corpus(vs, Metric::gini, true, kDefaultEpsilon, exec_of(state));
    benchmark::DoNotOptimize(s.entries.size());
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_ScoreCorpus)->ArgsProduct({{0, 1}, {0}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "fourthdown/bootstrap_uq.hpp"
#include "fourthdown/kernels.hpp"
#include "fourthdown/synthetic_oracle.hpp"

using namespace fourthdown;

namespace {

struct HistInput {
  BinnedMatrix m;
  std::vector<std::uint32_t> rows;
  std::vector<GradPair> gh;
  std::vector<GradPair> out;
};

HistInput& hist_input() {
  static HistInput in = [] {
    HistInput x;
    std::mt19937_64 rng(7);
    x.m.rows = 200000;
    x.m.cols = 12;
    x.m.offsets = {0};
    for (std::size_t c = 0; c < x.m.cols; ++c) x.m.offsets.push_back(x.m.offsets.back() + 256);
    x.m.codes.resize(x.m.rows * x.m.cols);
    for (auto& v : x.m.codes) v = static_cast<std::uint16_t>(rng() % 256);
    x.rows.resize(x.m.rows);
    std::iota(x.rows.begin(), x.rows.end(), 0u);
    std::normal_distribution<double> n;
    x.gh.resize(x.m.rows);
    for (auto& g : x.gh) g = {n(rng), 0.25};
    x.out.resize(x.m.total_bins());
    return x;
  }();
  return in;
}

void BM_histogram_serial(benchmark::State& state) {
  auto& x = hist_input();
  for (auto _ : state) {
    build_histogram_serial(x.m, x.rows, x.gh, x.out);
    benchmark::DoNotOptimize(x.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(x.m.rows));
}

void BM_histogram_parallel(benchmark::State& state) {
  auto& x = hist_input();
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    build_histogram_parallel(x.m, x.rows, x.gh, x.out);
    benchmark::DoNotOptimize(x.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(x.m.rows));
}

struct EvalInput {
  DecisionModel model;
  std::vector<FourthDownState> states;
};

EvalInput& eval_input() {
  static EvalInput in = [] {
    EvalInput x;
    const SyntheticWorld world{WorldConfig{}};
    const auto h = simulate_history(world, 300, 11);
    const auto pools = filter_training_pools(h.plays);
    const auto q = compute_quality(h.plays, pools);
    DecisionConfig cfg;
    cfg.wp_params.n_trees = 100;
    x.model = fit_decision_model(h.plays, pools, q, {}, cfg);
    for (std::size_t i = 0; i < h.plays.size(); ++i) {
      const auto& p = h.plays[i];
      if (p.down == 4 && p.ydstogo <= p.yardline) x.states.push_back(state_from_play(p, q, i));
    }
    return x;
  }();
  return in;
}

void BM_evaluate_serial(benchmark::State& state) {
  auto& x = eval_input();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_states_serial(x.model, x.states));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(x.states.size()));
}

void BM_evaluate_parallel(benchmark::State& state) {
  auto& x = eval_input();
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_states_parallel(x.model, x.states));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(x.states.size()));
}

void thread_counts(benchmark::internal::Benchmark* b) {
  for (int t = 1; t <= std::max(1, max_threads()); t *= 2) b->Arg(t);
}

}  // namespace

BENCHMARK(BM_histogram_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_histogram_parallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_parallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ct/kernels.hpp"
#include "ct/metrics.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_gemv(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto w = random_vec(n * n, 1), x = random_vec(n, 2);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) ct::kernels::gemv(w, n, n, x, y);
    else ct::kernels::serial::gemv(w, n, n, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

template <bool Parallel>
void BM_gemv_t_acc(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto w = random_vec(n * n, 1), gy = random_vec(n, 2);
  std::vector<double> gx(n);
  for (auto _ : state) {
    if constexpr (Parallel) ct::kernels::gemv_t_acc(w, n, n, gy, gx);
    else ct::kernels::serial::gemv_t_acc(w, n, n, gy, gx);
    benchmark::DoNotOptimize(gx.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

template <bool Parallel>
void BM_ger_acc(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto gy = random_vec(n, 1), x = random_vec(n, 2);
  std::vector<double> gw(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) ct::kernels::ger_acc(gy, x, gw);
    else ct::kernels::serial::ger_acc(gy, x, gw);
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

std::vector<ct::ScoredPair> random_pairs(std::size_t n) {
  std::mt19937_64 rng(3);
  std::vector<ct::ScoredPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    ct::TokenSeq c(5 + rng() % 30), r(5 + rng() % 30);
    for (auto& t : c) t = "w" + std::to_string(rng() % 50);
    for (auto& t : r) t = "w" + std::to_string(rng() % 50);
    pairs.push_back({std::to_string(i), std::move(c), std::move(r)});
  }
  return pairs;
}

template <bool Parallel>
void BM_score_instances(benchmark::State& state) {
  auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = Parallel ? ct::score_instances(pairs) : ct::score_instances_serial(pairs);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_gemv<false>)->Name("gemv/serial")->RangeMultiplier(4)->Range(32, 1024);
BENCHMARK(BM_gemv<true>)->Name("gemv/openmp")->RangeMultiplier(4)->Range(32, 1024);
BENCHMARK(BM_gemv_t_acc<false>)->Name("gemv_t_acc/serial")->RangeMultiplier(4)->Range(32, 1024);
BENCHMARK(BM_gemv_t_acc<true>)->Name("gemv_t_acc/openmp")->RangeMultiplier(4)->Range(32, 1024);
BENCHMARK(BM_ger_acc<false>)->Name("ger_acc/serial")->RangeMultiplier(4)->Range(32, 1024);
BENCHMARK(BM_ger_acc<true>)->Name("ger_acc/openmp")->RangeMultiplier(4)->Range(32, 1024);
BENCHMARK(BM_score_instances<false>)->Name("score_instances/serial")->Arg(1000);
BENCHMARK(BM_score_instances<true>)->Name("score_instances/openmp")->Arg(1000);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "ioest/process_models.hpp"

using namespace ioest;

namespace {

constexpr RandomStreamSpec kStream{1, 0, StreamRole::process_noise};

void BM_OuExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_ou({}, n, 0.01, kStream));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OuExact)->Range(1 << 12, 1 << 20);

void BM_GradientQuartic(benchmark::State& state) {
  GradientDiffusionParams p;
  p.potential = PolynomialPotential::quartic();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_gradient_diffusion(p, n, 0.005, kStream, 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradientQuartic)->Range(1 << 12, 1 << 18);

void BM_Heston(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_heston({}, n, 0.005, kStream));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Heston)->Range(1 << 12, 1 << 18);

void BM_SlowFast(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_slow_fast({0.1, SlowFastEntry::linear_ou}, n, 0.01, kStream, 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SlowFast)->Range(1 << 12, 1 << 18);

void BM_RealizedVolatility(benchmark::State& state) {
  const double eps = 0.005;
  const auto paths = simulate_heston({}, static_cast<std::size_t>(state.range(0)), eps, kStream);
  const std::size_t window = default_realized_window(eps);
  for (auto _ : state) {
    benchmark::DoNotOptimize(realized_volatility_observable(paths.returns, eps, window));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RealizedVolatility)->Range(1 << 12, 1 << 18);

}  // namespace

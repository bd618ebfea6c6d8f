#include <benchmark/benchmark.h>

#include <vector>

#include "ioest/moment_estimators.hpp"
#include "ioest/process_models.hpp"

using namespace ioest;

namespace {

TrajectoryGrid vector_path(std::size_t dim, std::size_t n) {
  std::vector<double> data;
  data.reserve(dim * n);
  const auto g = simulate_ou({}, dim * n, 0.01, {2, 0, StreamRole::process_noise});
  for (double v : g.values()) data.push_back(v);
  return TrajectoryGrid(dim, 0.01, std::move(data));
}

// Lagged covariance over N samples, r = range(1).
void BM_LaggedCovariance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto g = vector_path(dim, n + 16);
  const SampleView view(g);
  for (auto _ : state) benchmark::DoNotOptimize(lagged_covariance(view, n, 16, 0.01, 0.16));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LaggedCovariance)
    ->ArgsProduct({{1 << 10, 1 << 14, 1 << 18}, {1, 4}});

void BM_ProductForm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = vector_path(1, n + 16);
  const SampleView view(g);
  for (auto _ : state) benchmark::DoNotOptimize(lagged_covariance_product_form(view, n, 16));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProductForm)->Range(1 << 10, 1 << 18);

void BM_CovarianceCurveStrided(benchmark::State& state) {
  const std::size_t n = 10000, stride = 10;
  const auto g = simulate_ou({}, (n + 100) * stride, 0.01, {3, 0, StreamRole::process_noise});
  const auto scheme = make_scheme(n, stride, 0.01);
  const auto view = subsample_view(g, scheme, 0, 10);
  const std::vector<LagRequest> lags{{0.0}, {0.5}, {1.0}};
  for (auto _ : state) benchmark::DoNotOptimize(covariance_curve(view, scheme, lags));
}
BENCHMARK(BM_CovarianceCurveStrided);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "flamm/baselines.hpp"
#include "flamm/classifier.hpp"
#include "flamm/feature_stack.hpp"
#include "flamm/synthetic.hpp"

using namespace flamm;

namespace {

DataMatrix random_data(Index d, Index n, std::uint64_t seed) { return DataMatrix(gaussian_matrix(d, n, seed)); }

void BM_SecondMoment(benchmark::State& state) {
  const auto x = random_data(state.range(0), 2000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(second_moment(x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SecondMoment)->RangeMultiplier(2)->Range(16, 512)->Complexity();

void BM_SolveLayer(benchmark::State& state) {
  const Index d = state.range(0);
  const auto x = random_data(d, 4 * d, 2);
  const LayerParams params{10.0, 10.0, true};
  for (auto _ : state) benchmark::DoNotOptimize(solve_layer(x, 2 * d, params));
  state.SetComplexityN(d);
}
BENCHMARK(BM_SolveLayer)->RangeMultiplier(2)->Range(16, 512)->Complexity()->Unit(benchmark::kMillisecond);

void BM_FitStack(benchmark::State& state) {
  const auto layers = static_cast<std::size_t>(state.range(0));
  const auto s = random_data(100, 400, 3);
  const auto t = random_data(100, 400, 4);
  for (auto _ : state) benchmark::DoNotOptimize(fit_stack(s, t, {10.0, 10.0, true}, layers));
}
BENCHMARK(BM_FitStack)->DenseRange(1, 5, 2)->Unit(benchmark::kMillisecond);

void BM_CoralAlign(benchmark::State& state) {
  const Index d = state.range(0);
  const auto s = random_data(d, 4 * d, 5);
  const auto t = random_data(d, 4 * d, 6);
  for (auto _ : state) benchmark::DoNotOptimize(coral_align(s, t, 1.0));
}
BENCHMARK(BM_CoralAlign)->RangeMultiplier(4)->Range(16, 256)->Unit(benchmark::kMillisecond);

void BM_Train(benchmark::State& state) {
  PlantedShiftOptions o;
  o.n_source = state.range(0);
  o.d = 50;
  const auto data = planted_shift(o);
  for (auto _ : state) benchmark::DoNotOptimize(train(data.source));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Train)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Arg(4000)->Complexity()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

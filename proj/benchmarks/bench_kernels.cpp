#include <random>

#include <benchmark/benchmark.h>

#include "mtensor/imtd.hpp"
#include "mtensor/multiple.hpp"

using namespace mtensor;

namespace {

void BM_MultipleProduct(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const auto r = static_cast<Index>(state.range(1));
  std::mt19937_64 rng(1);
  const MultipleFactors f = random_factors({n, n, 3}, {r, r, r}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(multiple_product(f));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * 3));
}
BENCHMARK(BM_MultipleProduct)->Args({32, 4})->Args({64, 8})->Args({128, 12});

void BM_ContractionEnv(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  std::mt19937_64 rng(2);
  const MultipleFactors f = random_factors({n, n, n}, {6, 6, 6}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(contraction_env(f, 1));
}
BENCHMARK(BM_ContractionEnv)->Arg(16)->Arg(32);

ImtdModel model_for(const Shape& shape, Index rank, Index hidden) {
  ImtdConfig c;
  c.ranks = Shape(shape.size(), rank);
  c.domains = index_domains(shape);
  c.hidden = hidden;
  std::mt19937_64 rng(3);
  return ImtdModel::random(c, rng);
}

void BM_EvalGrid(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const Shape shape{n, n, 3};
  const ImtdModel m = model_for(shape, 5, 64);
  const GridCoords g = index_grid(shape);
  for (auto _ : state) benchmark::DoNotOptimize(eval_grid(m, g));
}
BENCHMARK(BM_EvalGrid)->Arg(32)->Arg(64);

void BM_GridBackward(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const Shape shape{n, n, 3};
  const ImtdModel m = model_for(shape, 5, 64);
  const GridCoords g = index_grid(shape);
  const DenseTensor cot(shape, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(grid_backward(m, g, cot));
}
BENCHMARK(BM_GridBackward)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();

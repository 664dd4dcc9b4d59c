// Serial vs OpenMP kernels, plus the end-to-end density estimate.

#include <benchmark/benchmark.h>

#include <vector>

#include "densctl/density.hpp"
#include "densctl/kernels.hpp"
#include "densctl/rng.hpp"

using namespace densctl;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (float& v : m.data()) v = static_cast<float>(rng.normal());
  return m;
}

template <auto Knn>
void BM_knn(benchmark::State& state) {
  const Matrix x = gaussian(static_cast<std::size_t>(state.range(0)), 2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Knn(x, x, 10, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Covered>
void BM_covered(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix q = gaussian(n, 2, 2), r = gaussian(n, 2, 3);
  const std::vector<double> radii(n, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(Covered(q, r, radii));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Affine>
void BM_affine(benchmark::State& state) {
  const Matrix a = gaussian(static_cast<std::size_t>(state.range(0)), 64, 4), w = gaussian(64, 64, 5);
  const std::vector<float> bias(64, 0.1f);
  for (auto _ : state) benchmark::DoNotOptimize(Affine(a, w, bias));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_estimate_density(benchmark::State& state) {
  const FeatureSet fs{gaussian(static_cast<std::size_t>(state.range(0)), 2, 6), "bench"};
  for (auto _ : state) benchmark::DoNotOptimize(estimate_density(fs, {}));
}

}  // namespace

BENCHMARK(BM_knn<&kernels::serial::knn>)->Name("knn/serial")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn<&kernels::omp::knn>)->Name("knn/omp")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_covered<&kernels::serial::covered>)->Name("covered/serial")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_covered<&kernels::omp::covered>)->Name("covered/omp")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_affine<&kernels::serial::affine>)->Name("affine/serial")->Arg(256)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_affine<&kernels::omp::affine>)->Name("affine/omp")->Arg(256)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_estimate_density)->Arg(4000)->Arg(16000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

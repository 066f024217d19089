// Serial reference kernels against the OpenMP versions used by the library.
// Arguments are {n, D}; set OMP_NUM_THREADS to vary the thread count.

#include <benchmark/benchmark.h>

#include <random>

#include "kdebias/kernels.hpp"

using namespace kdebias;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

template <Matrix (*Map)(const Eigen::Ref<const Matrix>&, const Eigen::Ref<const Matrix>&,
                        const Eigen::Ref<const Vector>&)>
void rff_map(benchmark::State& state) {
  const Index n = state.range(0);
  const Index dim = state.range(1);
  const Matrix x = gaussian(n, 16, 1);
  const Matrix freq = gaussian(dim, 16, 2);
  const Vector phase = Vector::LinSpaced(dim, 0.0, 6.28);
  for (auto _ : state) benchmark::DoNotOptimize(Map(x, freq, phase));
  state.SetItemsProcessed(state.iterations() * n * dim);
}

template <Matrix (*Cross)(const Eigen::Ref<const Matrix>&, const Eigen::Ref<const Matrix>&)>
void centered_cross(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = gaussian(n, state.range(1), 3);
  const Matrix b = gaussian(n, 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Cross(a, b));
  state.SetItemsProcessed(state.iterations() * n * state.range(1));
}

template <Matrix (*Gram)(const Eigen::Ref<const Matrix>&)>
void centered_gram(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = gaussian(n, state.range(1), 5);
  for (auto _ : state) benchmark::DoNotOptimize(Gram(a));
  state.SetItemsProcessed(state.iterations() * n * state.range(1));
}

template <Matrix (*Center)(const Eigen::Ref<const Matrix>&)>
void center_columns(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = gaussian(n, state.range(1), 6);
  for (auto _ : state) benchmark::DoNotOptimize(Center(a));
  state.SetItemsProcessed(state.iterations() * n * state.range(1));
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({5000, 256})->Args({5000, 1024})->Args({20000, 1000})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(rff_map<kernels::serial::rff_map>)->Name("rff_map/serial")->Apply(sizes);
BENCHMARK(rff_map<kernels::omp::rff_map>)->Name("rff_map/omp")->Apply(sizes);
BENCHMARK(centered_cross<kernels::serial::centered_cross>)->Name("centered_cross/serial")->Apply(sizes);
BENCHMARK(centered_cross<kernels::omp::centered_cross>)->Name("centered_cross/omp")->Apply(sizes);
BENCHMARK(centered_gram<kernels::serial::centered_gram>)->Name("centered_gram/serial")->Apply(sizes);
BENCHMARK(centered_gram<kernels::omp::centered_gram>)->Name("centered_gram/omp")->Apply(sizes);
BENCHMARK(center_columns<kernels::serial::center_columns>)->Name("center_columns/serial")->Apply(sizes);
BENCHMARK(center_columns<kernels::omp::center_columns>)->Name("center_columns/omp")->Apply(sizes);

BENCHMARK_MAIN();

// Serial kernels against their OpenMP twins. The thread count for the
// parallel runs comes from OMP_NUM_THREADS or DIME_SCOPE_THREADS.

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdlib>
#include <string>

#include "dime_scope/kernels.hpp"
#include "dime_scope/random.hpp"

namespace {

using dime::Matrix;
namespace kernels = dime::kernels;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dime::Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// First k columns of the Q factor of a random p×k matrix, by Gram-Schmidt.
Matrix orthonormal_columns(std::size_t p, std::size_t k, std::uint64_t seed) {
  Matrix q = random_matrix(p, k, seed);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < j; ++c) {
      double d = 0.0;
      for (std::size_t i = 0; i < p; ++i) d += q(i, j) * q(i, c);
      for (std::size_t i = 0; i < p; ++i) q(i, j) -= d * q(i, c);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < p; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < p; ++i) q(i, j) /= norm;
  }
  return q;
}

template <bool Parallel>
void BM_CrossProduct(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 256, 1);
  for (auto _ : state) {
    Matrix s = Parallel ? kernels::parallel::cross_product(x, {}) : kernels::serial::cross_product(x, {});
    benchmark::DoNotOptimize(s.data().data());
  }
}

template <bool Parallel>
void BM_ProjectResidual(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, 640, 2);
  const Matrix basis = orthonormal_columns(640, 64, 3);
  Matrix proj(n, 64);
  std::vector<double> residual(n);
  for (auto _ : state) {
    if (Parallel) {
      kernels::parallel::project_residual(x, basis, {}, proj, residual);
    } else {
      kernels::serial::project_residual(x, basis, {}, proj, residual);
    }
    benchmark::DoNotOptimize(residual.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_QuadraticNorms(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, 128, 4);
  const Matrix inverse = Matrix::identity(128);
  std::vector<double> out(n);
  for (auto _ : state) {
    if (Parallel) {
      kernels::parallel::quadratic_norms(x, inverse, {}, out);
    } else {
      kernels::serial::quadratic_norms(x, inverse, {}, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_NearestCentroid(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, 64, 5);
  const Matrix centroids = random_matrix(10, 64, 6);
  const Matrix inverse = Matrix::identity(64);
  std::vector<double> distance(n);
  std::vector<std::size_t> closest(n);
  for (auto _ : state) {
    if (Parallel) {
      kernels::parallel::nearest_centroid(x, centroids, inverse, distance, closest);
    } else {
      kernels::serial::nearest_centroid(x, centroids, inverse, distance, closest);
    }
    benchmark::DoNotOptimize(distance.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_CrossProduct<false>)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CrossProduct<true>)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProjectResidual<false>)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProjectResidual<true>)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QuadraticNorms<false>)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QuadraticNorms<true>)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestCentroid<false>)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestCentroid<true>)->Arg(10000)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  if (const char* env = std::getenv("DIME_SCOPE_THREADS")) kernels::set_thread_limit(std::atoi(env));
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}

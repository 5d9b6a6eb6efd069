#include "dime_scope/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "dime_scope/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dime::kernels {

namespace {

std::atomic<int> g_thread_limit{0};

int active_threads() {
#ifdef _OPENMP
  const int limit = g_thread_limit.load();
  return limit > 0 ? limit : omp_get_max_threads();
#else
  return 1;
#endif
}

// Four interleaved partial sums. The order of additions depends only on the
// length, never on the caller, which keeps serial and parallel kernels
// bit-identical.
inline double dot4(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

constexpr std::size_t kTile = 16;

// Centered transpose: column j of x (minus center[j]) becomes row j.
Matrix centered_transpose(const Matrix& x, std::span<const double> center) {
  Matrix t(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) t(j, i) = center.empty() ? r[j] : r[j] - center[j];
  }
  return t;
}

// Fills the upper-triangle entries of G = rows·rowsᵀ whose row index lies in
// tile `ta`, then mirrors them.
inline void gram_tile(const Matrix& rows, std::size_t ta, Matrix& g) {
  const std::size_t m = rows.rows();
  const std::size_t len = rows.cols();
  const std::size_t a0 = ta * kTile;
  const std::size_t a1 = std::min(a0 + kTile, m);
  for (std::size_t b0 = a0; b0 < m; b0 += kTile) {
    const std::size_t b1 = std::min(b0 + kTile, m);
    for (std::size_t a = a0; a < a1; ++a) {
      const double* ra = rows.row(a).data();
      for (std::size_t b = std::max(a, b0); b < b1; ++b) {
        const double v = dot4(ra, rows.row(b).data(), len);
        g(a, b) = v;
        g(b, a) = v;
      }
    }
  }
}

inline void project_residual_row(std::span<const double> phi, const Matrix& basis,
                                 std::span<const double> center, std::span<double> scratch,
                                 std::span<double> proj, double& residual) {
  const std::size_t p = basis.rows();
  const std::size_t k = basis.cols();
  for (std::size_t i = 0; i < p; ++i) scratch[i] = center.empty() ? phi[i] : phi[i] - center[i];
  std::fill(proj.begin(), proj.end(), 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const double s = scratch[i];
    const double* vrow = basis.row(i).data();
    for (std::size_t j = 0; j < k; ++j) proj[j] += s * vrow[j];
  }
  for (std::size_t i = 0; i < p; ++i) scratch[i] -= dot4(basis.row(i).data(), proj.data(), k);
  residual = std::sqrt(dot4(scratch.data(), scratch.data(), p));
}

inline double quadratic_norm_row(std::span<const double> v, const Matrix& inverse,
                                 std::span<const double> center, std::span<double> diff) {
  const std::size_t m = inverse.rows();
  for (std::size_t i = 0; i < m; ++i) diff[i] = center.empty() ? v[i] : v[i] - center[i];
  double q = 0.0;
  for (std::size_t a = 0; a < m; ++a) q += diff[a] * dot4(inverse.row(a).data(), diff.data(), m);
  return std::sqrt(std::max(q, 0.0));
}

inline void nearest_centroid_row(std::span<const double> phi, const Matrix& centroids,
                                 const Matrix& inverse, std::span<double> diff, double& min_distance,
                                 std::size_t& closest) {
  double best_euclid = std::numeric_limits<double>::infinity();
  min_distance = std::numeric_limits<double>::infinity();
  closest = 0;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    auto mu = centroids.row(c);
    for (std::size_t i = 0; i < phi.size(); ++i) diff[i] = phi[i] - mu[i];
    const double e = dot4(diff.data(), diff.data(), phi.size());
    if (e < best_euclid) {
      best_euclid = e;
      closest = c;
    }
    min_distance = std::min(min_distance, quadratic_norm_row(phi, inverse, mu, diff));
  }
}

void check_project_args(const Matrix& x, const Matrix& basis, std::span<const double> center,
                        const Matrix& projection, std::span<double> residual) {
  if (x.cols() != basis.rows()) throw ValidationError("project_residual: width mismatch");
  if (!center.empty() && center.size() != x.cols()) throw ValidationError("project_residual: center length");
  if (projection.rows() != x.rows() || projection.cols() != basis.cols() || residual.size() != x.rows()) {
    throw ValidationError("project_residual: output shape");
  }
}

void check_quadratic_args(const Matrix& x, const Matrix& inverse, std::span<const double> center,
                          std::span<double> out) {
  if (inverse.rows() != inverse.cols() || x.cols() != inverse.rows()) {
    throw ValidationError("quadratic_norms: width mismatch");
  }
  if (!center.empty() && center.size() != x.cols()) throw ValidationError("quadratic_norms: center length");
  if (out.size() != x.rows()) throw ValidationError("quadratic_norms: output length");
}

void check_centroid_args(const Matrix& x, const Matrix& centroids, const Matrix& inverse,
                         std::span<double> min_distance, std::span<std::size_t> closest) {
  if (centroids.cols() != x.cols() || inverse.rows() != x.cols() || inverse.cols() != x.cols()) {
    throw ValidationError("nearest_centroid: width mismatch");
  }
  if (centroids.rows() == 0) throw ValidationError("nearest_centroid: no centroids");
  if (min_distance.size() != x.rows() || closest.size() != x.rows()) {
    throw ValidationError("nearest_centroid: output length");
  }
}

}  // namespace

void set_thread_limit(int threads) { g_thread_limit.store(std::max(threads, 0)); }
int thread_limit() { return active_threads(); }

std::vector<double> column_means(const Matrix& x) {
  std::vector<double> mean(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += r[j];
  }
  for (double& m : mean) m /= static_cast<double>(x.rows());
  return mean;
}

namespace serial {

Matrix cross_product(const Matrix& x, std::span<const double> center) {
  const Matrix t = centered_transpose(x, center);
  Matrix g(t.rows(), t.rows());
  const std::size_t tiles = (t.rows() + kTile - 1) / kTile;
  for (std::size_t ta = 0; ta < tiles; ++ta) gram_tile(t, ta, g);
  return g;
}

Matrix outer_gram(const Matrix& x) {
  Matrix g(x.rows(), x.rows());
  const std::size_t tiles = (x.rows() + kTile - 1) / kTile;
  for (std::size_t ta = 0; ta < tiles; ++ta) gram_tile(x, ta, g);
  return g;
}

void project_residual(const Matrix& x, const Matrix& basis, std::span<const double> center,
                      Matrix& projection, std::span<double> residual) {
  check_project_args(x, basis, center, projection, residual);
  std::vector<double> scratch(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    project_residual_row(x.row(i), basis, center, scratch, projection.row(i), residual[i]);
  }
}

void quadratic_norms(const Matrix& x, const Matrix& inverse, std::span<const double> center,
                     std::span<double> out) {
  check_quadratic_args(x, inverse, center, out);
  std::vector<double> diff(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = quadratic_norm_row(x.row(i), inverse, center, diff);
}

void nearest_centroid(const Matrix& x, const Matrix& centroids, const Matrix& inverse,
                      std::span<double> min_distance, std::span<std::size_t> closest) {
  check_centroid_args(x, centroids, inverse, min_distance, closest);
  std::vector<double> diff(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    nearest_centroid_row(x.row(i), centroids, inverse, diff, min_distance[i], closest[i]);
  }
}

}  // namespace serial

namespace parallel {

Matrix cross_product(const Matrix& x, std::span<const double> center) {
  const Matrix t = centered_transpose(x, center);
  Matrix g(t.rows(), t.rows());
  const auto tiles = static_cast<std::ptrdiff_t>((t.rows() + kTile - 1) / kTile);
#pragma omp parallel for schedule(dynamic) num_threads(active_threads())
  for (std::ptrdiff_t ta = 0; ta < tiles; ++ta) gram_tile(t, static_cast<std::size_t>(ta), g);
  return g;
}

Matrix outer_gram(const Matrix& x) {
  Matrix g(x.rows(), x.rows());
  const auto tiles = static_cast<std::ptrdiff_t>((x.rows() + kTile - 1) / kTile);
#pragma omp parallel for schedule(dynamic) num_threads(active_threads())
  for (std::ptrdiff_t ta = 0; ta < tiles; ++ta) gram_tile(x, static_cast<std::size_t>(ta), g);
  return g;
}

void project_residual(const Matrix& x, const Matrix& basis, std::span<const double> center,
                      Matrix& projection, std::span<double> residual) {
  check_project_args(x, basis, center, projection, residual);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel num_threads(active_threads())
  {
    std::vector<double> scratch(x.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      project_residual_row(x.row(r), basis, center, scratch, projection.row(r), residual[r]);
    }
  }
}

void quadratic_norms(const Matrix& x, const Matrix& inverse, std::span<const double> center,
                     std::span<double> out) {
  check_quadratic_args(x, inverse, center, out);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel num_threads(active_threads())
  {
    std::vector<double> diff(x.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      out[r] = quadratic_norm_row(x.row(r), inverse, center, diff);
    }
  }
}

void nearest_centroid(const Matrix& x, const Matrix& centroids, const Matrix& inverse,
                      std::span<double> min_distance, std::span<std::size_t> closest) {
  check_centroid_args(x, centroids, inverse, min_distance, closest);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel num_threads(active_threads())
  {
    std::vector<double> diff(x.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      nearest_centroid_row(x.row(r), centroids, inverse, diff, min_distance[r], closest[r]);
    }
  }
}

}  // namespace parallel

}  // namespace dime::kernels

#include "dime_scope/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dime_scope/error.hpp"
#include "dime_scope/kernels.hpp"

namespace dime {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxQlIterations = 64;

// Reduces the symmetric matrix held in v to tridiagonal form (diagonal d,
// subdiagonal e) and leaves the accumulated orthogonal transform in v.
void tridiagonalize(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = v.rows();
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). Rotations are applied to the rows of
// z, which holds the transposed transform: row i ends as eigenvector i.
void ql_iterate(Matrix& z, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kEps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kMaxQlIterations) throw ValidationError("symmetric_eigen: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          double* zi = z.row(ii).data();
          double* zi1 = z.row(ii + 1).data();
          for (std::size_t k = 0; k < n; ++k) {
            const double t = zi1[k];
            zi1[k] = s * zi[k] + c * t;
            zi[k] = c * zi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

// Gram eigenvalues within `floor` of zero (or negative) are rounding noise.
std::vector<double> singular_values_from_gram(std::vector<double> lambda) {
  const double lmax = lambda.empty() ? 0.0 : std::max(lambda.front(), 0.0);
  const double floor = static_cast<double>(lambda.size()) * kEps * lmax;
  for (double& l : lambda) l = (l <= floor) ? 0.0 : std::sqrt(l);
  return lambda;
}

// Orthonormalizes column j of q against columns [0, j) with two passes of
// modified Gram-Schmidt. Returns false when almost nothing is left.
bool orthonormalize_column(Matrix& q, std::size_t j) {
  const std::size_t m = q.rows();
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t c = 0; c < j; ++c) {
      double proj = 0.0;
      for (std::size_t i = 0; i < m; ++i) proj += q(i, c) * q(i, j);
      for (std::size_t i = 0; i < m; ++i) q(i, j) -= proj * q(i, c);
    }
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) norm += q(i, j) * q(i, j);
  norm = std::sqrt(norm);
  if (norm < 1e-3) return false;
  for (std::size_t i = 0; i < m; ++i) q(i, j) /= norm;
  return true;
}

// Replaces column j by the first standard basis vector that survives
// orthogonalization against columns [0, j).
void complete_column(Matrix& q, std::size_t j) {
  for (std::size_t t = 0; t < q.rows(); ++t) {
    for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) = (i == t) ? 1.0 : 0.0;
    if (orthonormalize_column(q, j)) return;
  }
  throw ValidationError("cannot complete orthonormal basis");
}

// Given orthonormal singular vectors on one side (columns of `small`), forms
// the first m vectors on the other side as mat·small_j / σ_j. `mat` maps the
// small side to the other side.
Matrix other_side(const Matrix& mat, const Matrix& small, std::span<const double> sigma, std::size_t m) {
  Matrix out(mat.rows(), m);
  const double smax = sigma.empty() ? 0.0 : sigma.front();
  for (std::size_t j = 0; j < m; ++j) {
    bool ok = false;
    if (sigma[j] > 0.0 && sigma[j] > 1e-10 * smax) {
      for (std::size_t i = 0; i < mat.rows(); ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < mat.cols(); ++l) s += mat(i, l) * small(l, j);
        out(i, j) = s / sigma[j];
      }
      ok = orthonormalize_column(out, j);
    }
    if (!ok) complete_column(out, j);
  }
  return out;
}

Matrix leading_columns(const Matrix& m, std::size_t k) {
  Matrix out(m.rows(), k);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
  return out;
}

void check_svd_input(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw ValidationError("svd: empty matrix");
  require_finite(x, "svd input");
}

}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("symmetric_eigen: matrix is not square");
  const std::size_t n = a.rows();
  if (n == 0) return {};
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v(i, j) = 0.5 * (a(i, j) + a(j, i));

  std::vector<double> d(n), e(n);
  if (n == 1) {
    return {{v(0, 0)}, Matrix::identity(1)};
  }
  tridiagonalize(v, d, e);
  Matrix z = v.transposed();
  ql_iterate(z, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d[order[c]];
    auto src = z.row(order[c]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, c) = src[i];
  }
  return out;
}

RightSvd right_svd(const Matrix& x) {
  check_svd_input(x);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (p <= n) {
    auto eig = symmetric_eigen(kernels::cross_product(x, {}));
    return {singular_values_from_gram(std::move(eig.values)), std::move(eig.vectors)};
  }
  auto eig = symmetric_eigen(kernels::outer_gram(x));
  auto sigma = singular_values_from_gram(std::move(eig.values));
  Matrix v = other_side(x.transposed(), eig.vectors, sigma, n);
  return {std::move(sigma), std::move(v)};
}

SvdResult truncated_svd(const Matrix& x, std::size_t k) {
  check_svd_input(x);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const std::size_t kmax = std::min(n, p);
  if (k < 1 || k > kmax) {
    throw ValidationError("truncated_svd: k=" + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
  }
  SvdResult out;
  if (p <= n) {
    auto eig = symmetric_eigen(kernels::cross_product(x, {}));
    auto sigma = singular_values_from_gram(std::move(eig.values));
    out.v = leading_columns(eig.vectors, k);
    out.u = other_side(x, out.v, sigma, k);
    out.sigma.assign(sigma.begin(), sigma.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    auto eig = symmetric_eigen(kernels::outer_gram(x));
    auto sigma = singular_values_from_gram(std::move(eig.values));
    out.u = leading_columns(eig.vectors, k);
    out.v = other_side(x.transposed(), out.u, sigma, k);
    out.sigma.assign(sigma.begin(), sigma.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

std::size_t numerical_rank(std::span<const double> sigma) {
  if (sigma.empty()) return 0;
  const double smax = *std::max_element(sigma.begin(), sigma.end());
  if (smax <= 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > 1e-10 * smax; }));
}

std::vector<double> VarianceSpectrum::component_variances(std::span<const double> sigma) const {
  std::vector<double> out(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = sigma[i] * sigma[i] / static_cast<double>(n);
  return out;
}

VarianceSpectrum variance_spectrum(std::span<const double> sigma, std::size_t n) {
  if (sigma.empty()) throw ValidationError("variance_spectrum: no singular values");
  if (n == 0) throw ValidationError("variance_spectrum: sample count must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] >= 0.0) || !std::isfinite(sigma[i])) {
      throw ValidationError("variance_spectrum: singular values must be finite and nonnegative");
    }
    if (i > 0 && sigma[i] > sigma[i - 1]) throw ValidationError("variance_spectrum: singular values not sorted");
    total += sigma[i] * sigma[i];
  }
  if (total == 0.0) throw ValidationError("variance_spectrum: all singular values are zero");
  VarianceSpectrum out;
  out.n = n;
  out.ratios.resize(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) out.ratios[i] = sigma[i] * sigma[i] / total;
  return out;
}

std::size_t select_rank(const VarianceSpectrum& spectrum, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw ValidationError("select_rank: r must lie in (0, 1]");
  const auto& ratios = spectrum.ratios;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i)
    if (ratios[i] > 0.0) nonzero = i + 1;
  if (r >= 1.0) return nonzero;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < nonzero; ++i) {
    cumulative += ratios[i];
    if (cumulative >= r) return i + 1;
  }
  return nonzero;
}

Matrix covariance(const Matrix& x, std::optional<std::span<const double>> center,
                  CovarianceNormalizer normalizer) {
  if (x.rows() < 2) throw ValidationError("covariance: need at least 2 rows, got " + std::to_string(x.rows()));
  std::vector<double> means;
  std::span<const double> c;
  if (center) {
    if (center->size() != x.cols()) throw ValidationError("covariance: center length mismatch");
    c = *center;
  } else {
    means = kernels::column_means(x);
    c = means;
  }
  Matrix cov = kernels::cross_product(x, c);
  const double denom = static_cast<double>(normalizer == CovarianceNormalizer::kBiased ? x.rows() : x.rows() - 1);
  for (double& v : cov.data()) v /= denom;
  return cov;
}

InverseCovariance spd_inverse(const Matrix& c, double ridge) {
  if (c.rows() != c.cols()) throw ValidationError("spd_inverse: matrix is not square");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("spd_inverse: ridge must be finite and nonnegative");
  require_finite(c, "spd_inverse input");
  const std::size_t p = c.rows();
  double max_abs = 0.0;
  for (double v : c.data()) max_abs = std::max(max_abs, std::abs(v));
  const double sym_tol = 1e-10 * std::max(1.0, max_abs);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (std::abs(c(i, j) - c(j, i)) > sym_tol) throw ValidationError("spd_inverse: matrix is not symmetric");

  const auto eig = symmetric_eigen(c);
  const double lmax = p == 0 ? 0.0 : eig.values.front();
  const double lmin = p == 0 ? 0.0 : eig.values.back();
  if (lmin < -1e-10 * std::abs(lmax)) {
    throw ValidationError("spd_inverse: matrix has a negative eigenvalue (" + std::to_string(lmin) + ")");
  }

  std::vector<double> recip(p, 0.0);
  std::size_t rank = 0;
  for (std::size_t l = 0; l < p; ++l) {
    const double lambda = std::max(eig.values[l], 0.0);
    if (ridge > 0.0) {
      recip[l] = 1.0 / (lambda + ridge);
      ++rank;
    } else if (lmax > 0.0 && lambda > 1e-10 * lmax) {
      recip[l] = 1.0 / lambda;
      ++rank;
    }
  }

  InverseCovariance out{Matrix(p, p), ridge, rank};
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      double s = 0.0;
      for (std::size_t l = 0; l < p; ++l) {
        if (recip[l] != 0.0) s += eig.vectors(a, l) * eig.vectors(b, l) * recip[l];
      }
      out.matrix(a, b) = s;
      out.matrix(b, a) = s;
    }
  }
  return out;
}

Ecdf::Ecdf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
  if (sorted_.empty()) throw ValidationError("ecdf: no calibration values");
  require_finite(sorted_, "ecdf values");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::eval(double x) const {
  const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double Ecdf::survival(double x) const {
  const auto greater = sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(greater) / static_cast<double>(sorted_.size());
}

}  // namespace dime

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dime_scope/matrix.hpp"

namespace dime {

// Eigenvalues in nonincreasing order; column i of `vectors` pairs with
// values[i]. Columns are orthonormal.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

// Householder tridiagonalization followed by implicit QL iterations.
// `a` must be square; only symmetry within rounding is assumed.
SymmetricEigen symmetric_eigen(const Matrix& a);

struct SvdResult {
  Matrix u;                   // n×k
  std::vector<double> sigma;  // k, nonincreasing, nonnegative
  Matrix v;                   // p×k
};

// All min(n,p) singular values plus the matching right singular vectors,
// without forming U. Zero singular values get right vectors that complete an
// orthonormal basis.
struct RightSvd {
  std::vector<double> sigma;
  Matrix v;
};

// Computed from the exact eigendecomposition of the smaller Gram matrix.
// Singular values below roughly 1e-8·σ_max are not resolved by this route:
// eigenvalues of the Gram matrix within min(n,p)·ε·λ_max of zero are set to
// exactly zero, and singular vectors for σ below that scale are only
// accurate to within the orthogonal complement of the better-resolved ones.
RightSvd right_svd(const Matrix& x);

// Best rank-k approximation factors, 1 ≤ k ≤ min(n,p).
SvdResult truncated_svd(const Matrix& x, std::size_t k);

// Number of singular values strictly above 1e-10·σ_max.
std::size_t numerical_rank(std::span<const double> sigma);

struct VarianceSpectrum {
  std::vector<double> ratios;  // R², one per singular value, sums to 1
  std::size_t n = 0;           // sample count for the σ²/n normalization

  // σ²/n per component, for reporting.
  std::vector<double> component_variances(std::span<const double> sigma) const;
};

VarianceSpectrum variance_spectrum(std::span<const double> sigma, std::size_t n);

// Smallest k with cumulative ratio ≥ r. r in (0, 1].
std::size_t select_rank(const VarianceSpectrum& spectrum, double r);

enum class CovarianceNormalizer { kBiased, kUnbiased };  // 1/n or 1/(n-1)

// Empirical covariance about `center`, or about the column means when no
// center is given. Requires n ≥ 2.
Matrix covariance(const Matrix& x, std::optional<std::span<const double>> center = std::nullopt,
                  CovarianceNormalizer normalizer = CovarianceNormalizer::kBiased);

struct InverseCovariance {
  Matrix matrix;
  double regularization = 0.0;
  std::size_t effective_rank = 0;
};

// ridge > 0: inverse of (c + ridge·I). ridge == 0: pseudo-inverse that drops
// eigenvalues at or below 1e-10·λ_max.
InverseCovariance spd_inverse(const Matrix& c, double ridge);

// Step ECDF with weak inequality: eval(x) = #{v ≤ x} / n.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> values);

  double eval(double x) const;
  // Fraction of values strictly greater than x, i.e. 1 − eval(x) without rounding.
  double survival(double x) const;
  std::span<const double> sorted_values() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

  bool operator==(const Ecdf&) const = default;

 private:
  std::vector<double> sorted_;
};

inline Ecdf ecdf_fit(std::span<const double> values) { return Ecdf(values); }
inline double ecdf_eval(const Ecdf& e, double x) { return e.eval(x); }

}  // namespace dime

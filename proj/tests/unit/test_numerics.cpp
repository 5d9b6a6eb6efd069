#include "doctest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>

#include "dime_scope/error.hpp"
#include "dime_scope/numerics.hpp"
#include "test_support.hpp"

using namespace dime;
using dime::testing::random_matrix;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

double orthonormality_error(const Matrix& q) {
  const Matrix g = multiply_at_b(q, q);
  return dime::testing::max_abs_diff(g, Matrix::identity(q.cols()));
}

Matrix reconstruct(const SvdResult& s) {
  Matrix out(s.u.rows(), s.v.rows());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < s.sigma.size(); ++c) acc += s.u(i, c) * s.sigma[c] * s.v(j, c);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("symmetric eigendecomposition agrees with Eigen") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const Matrix b = random_matrix(rng, n, n);
    Matrix a = multiply_at_b(b, b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) -= (i == j ? 2.0 : 0.0);
    const auto ours = symmetric_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(to_eigen(a));
    const auto& ev = oracle.eigenvalues();
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ours.values[i] == doctest::Approx(ev(static_cast<Eigen::Index>(n - 1 - i))).epsilon(1e-10).scale(10.0));
    }
    CHECK(orthonormality_error(ours.vectors) < 1e-12);
    // A·v = λ·v
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        double av = 0.0;
        for (std::size_t j = 0; j < n; ++j) av += a(i, j) * ours.vectors(j, c);
        CHECK(std::abs(av - ours.values[c] * ours.vectors(i, c)) < 1e-9);
      }
  }
}

TEST_CASE("svd of a diagonal matrix") {
  const auto s = truncated_svd(Matrix{{2, 0}, {0, 1}}, 2);
  CHECK(s.sigma[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.sigma[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(std::abs(s.v(0, 0)) - 1.0) < 1e-14);
  CHECK(std::abs(std::abs(s.v(1, 1)) - 1.0) < 1e-14);
}

TEST_CASE("svd of a rank-one matrix") {
  const auto s = truncated_svd(Matrix{{1, 2}, {2, 4}}, 2);
  CHECK(s.sigma[0] == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(s.sigma[1] == 0.0);
  const double sign = s.v(0, 0) > 0 ? 1.0 : -1.0;
  CHECK(sign * s.v(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-14));
  CHECK(sign * s.v(1, 0) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-14));
  CHECK(orthonormality_error(s.v) < 1e-14);
  CHECK(orthonormality_error(s.u) < 1e-14);
}

TEST_CASE("full-rank truncated svd reconstructs the input") {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.below(15), p = 1 + rng.below(15);
    const Matrix x = random_matrix(rng, n, p);
    const auto s = truncated_svd(x, std::min(n, p));
    CHECK(std::sqrt(frobenius_norm_sq(reconstruct(s) - x)) <= 1e-8 * std::sqrt(frobenius_norm_sq(x)));
    CHECK(orthonormality_error(s.u) < 1e-10);
    CHECK(orthonormality_error(s.v) < 1e-10);
    CHECK(std::is_sorted(s.sigma.rbegin(), s.sigma.rend()));
  }
}

TEST_CASE("singular values agree with Eigen for tall, wide and rank-deficient inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(20), p = 2 + rng.below(20);
    Matrix x = random_matrix(rng, n, p);
    if (trial % 3 == 0) x = dime::testing::low_rank_plus_noise(rng, n, p, 1, 0.0);
    const auto ours = right_svd(x);
    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(x));
    const auto& sv = oracle.singularValues();
    REQUIRE(ours.sigma.size() == static_cast<std::size_t>(sv.size()));
    for (std::size_t i = 0; i < ours.sigma.size(); ++i) CHECK(std::abs(ours.sigma[i] - sv(i)) < 1e-8 * sv(0));
    CHECK(orthonormality_error(ours.v) < 1e-10);
  }
}

TEST_CASE("truncated svd meets the Eckart-Young bound and the residual identity") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_matrix(rng, 6, 4);
    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(x));
    const auto& sv = oracle.singularValues();
    for (std::size_t k = 1; k <= 4; ++k) {
      const auto s = truncated_svd(x, k);
      const double err = frobenius_norm_sq(reconstruct(s) - x);
      double tail = 0.0;
      for (Eigen::Index i = static_cast<Eigen::Index>(k); i < sv.size(); ++i) tail += sv(i) * sv(i);
      CHECK(std::abs(err - tail) <= 1e-8 * std::max(tail, 1e-12) + 1e-12);
    }
  }
}

TEST_CASE("frobenius identity") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix x = random_matrix(rng, 1 + rng.below(30), 1 + rng.below(30), 10.0);
    const auto s = right_svd(x);
    double sum = 0.0;
    for (double v : s.sigma) sum += v * v;
    CHECK(dime::testing::relative_diff(sum, frobenius_norm_sq(x)) < 1e-8);
  }
}

TEST_CASE("truncated svd validates its arguments") {
  CHECK_THROWS_AS(truncated_svd(Matrix{{1, 2}, {3, 4}}, 0), ValidationError);
  CHECK_THROWS_AS(truncated_svd(Matrix{{1, 2}, {3, 4}}, 3), ValidationError);
  CHECK_THROWS_AS(truncated_svd(Matrix{{1, std::numeric_limits<double>::infinity()}}, 1), ValidationError);
}

TEST_CASE("numerical rank cutoff") {
  CHECK(numerical_rank(std::vector<double>{5, 1e-9, 1e-12}) == 2);
  CHECK(numerical_rank(std::vector<double>{5, 0}) == 1);
  CHECK(numerical_rank(std::vector<double>{0, 0}) == 0);
}

TEST_CASE("variance spectrum examples") {
  const auto a = variance_spectrum(std::vector<double>{4, 3}, 10);
  CHECK(a.ratios[0] == doctest::Approx(16.0 / 25.0).epsilon(1e-15));
  CHECK(a.ratios[1] == doctest::Approx(9.0 / 25.0).epsilon(1e-15));
  CHECK(a.n == 10);
  const auto vars = a.component_variances(std::vector<double>{4, 3});
  CHECK(vars[0] == doctest::Approx(1.6));
  const auto b = variance_spectrum(std::vector<double>{1, 1}, 3);
  CHECK(b.ratios == std::vector<double>{0.5, 0.5});
  const auto c = variance_spectrum(std::vector<double>{5, 0}, 3);
  CHECK(c.ratios == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(variance_spectrum(std::vector<double>{0, 0}, 3), ValidationError);
  CHECK_THROWS_AS(variance_spectrum(std::vector<double>{1, 2}, 3), ValidationError);
  CHECK_THROWS_AS(variance_spectrum(std::vector<double>{1, -1}, 3), ValidationError);
}

TEST_CASE("select rank examples") {
  VarianceSpectrum s{{0.64, 0.36}, 10};
  CHECK(select_rank(s, 0.5) == 1);
  CHECK(select_rank(s, 0.99) == 2);
  CHECK(select_rank(s, 0.64) == 1);
  VarianceSpectrum z{{0.7, 0.3, 0.0, 0.0}, 10};
  CHECK(select_rank(z, 1.0) == 2);
}

TEST_CASE("select rank is monotone in r and ratios sum to one") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> sigma(1 + rng.below(20));
    for (double& v : sigma) v = rng.uniform() < 0.2 ? 0.0 : std::abs(rng.normal()) * 10;
    sigma[0] += 0.1;
    std::sort(sigma.rbegin(), sigma.rend());
    const auto spec = variance_spectrum(sigma, 100);
    CHECK(std::abs(std::accumulate(spec.ratios.begin(), spec.ratios.end(), 0.0) - 1.0) < 1e-9);
    std::size_t prev = 0;
    for (double r : {0.01, 0.1, 0.5, 0.9, 0.95, 0.99, 0.999, 1.0}) {
      const std::size_t k = select_rank(spec, r);
      CHECK(k >= prev);
      CHECK(k >= 1);
      CHECK(k <= sigma.size());
      prev = k;
    }
  }
}

TEST_CASE("covariance examples") {
  CHECK(covariance(Matrix{{1, 0}, {-1, 0}}) == Matrix{{1, 0}, {0, 0}});
  CHECK(covariance(Matrix{{3, 2}, {3, 2}, {3, 2}}) == Matrix(2, 2));
  const Matrix unbiased = covariance(Matrix{{1, 0}, {-1, 0}}, std::nullopt, CovarianceNormalizer::kUnbiased);
  CHECK(unbiased(0, 0) == 2.0);
  const std::vector<double> origin{0, 0};
  CHECK(covariance(Matrix{{1, 1}, {1, 1}}, std::span<const double>(origin)) == Matrix{{1, 1}, {1, 1}});
  CHECK_THROWS_AS(covariance(Matrix{{1, 2}}), ValidationError);

  Rng rng(7);
  const Matrix c = covariance(random_matrix(rng, 20, 5));
  CHECK(c == c.transposed());
  const auto eig = symmetric_eigen(c);
  CHECK(eig.values.back() > -1e-12);
}

TEST_CASE("spd inverse examples") {
  const auto id = spd_inverse(Matrix::identity(3), 0.0);
  CHECK(dime::testing::max_abs_diff(id.matrix, Matrix::identity(3)) < 1e-15);
  CHECK(id.effective_rank == 3);

  const auto pinv = spd_inverse(Matrix{{4, 0}, {0, 0}}, 0.0);
  CHECK(dime::testing::max_abs_diff(pinv.matrix, Matrix{{0.25, 0}, {0, 0}}) < 1e-15);
  CHECK(pinv.effective_rank == 1);

  const auto ridge = spd_inverse(Matrix{{4, 0}, {0, 0}}, 1.0);
  CHECK(dime::testing::max_abs_diff(ridge.matrix, Matrix{{0.2, 0}, {0, 1}}) < 1e-15);
  CHECK(ridge.regularization == 1.0);
  CHECK(ridge.effective_rank == 2);

  const auto zero = spd_inverse(Matrix(2, 2), 0.0);
  CHECK(zero.matrix == Matrix(2, 2));
  CHECK(zero.effective_rank == 0);
}

TEST_CASE("spd inverse rejects asymmetric and indefinite input") {
  CHECK_THROWS_AS(spd_inverse(Matrix{{1, 0.5}, {0, 1}}, 0.0), ValidationError);
  CHECK_THROWS_AS(spd_inverse(Matrix{{1, 0}, {0, -1}}, 0.0), ValidationError);
  CHECK_THROWS_AS(spd_inverse(Matrix{{1, 0}, {0, 1}}, -1.0), ValidationError);
  CHECK_NOTHROW(spd_inverse(Matrix{{1, 0}, {0, -1e-12}}, 0.0));
}

TEST_CASE("spd inverse is an inverse on the retained eigenspace") {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t p = 2 + rng.below(8);
    const std::size_t rank = 1 + rng.below(p);
    const Matrix b = random_matrix(rng, rank, p);
    const Matrix c = multiply_at_b(b, b);
    const double ridge = trial % 2 == 0 ? 0.0 : 0.5;
    const auto inv = spd_inverse(c, ridge);
    Matrix shifted = c;
    for (std::size_t i = 0; i < p; ++i) shifted(i, i) += ridge;
    const Matrix prod = multiply(inv.matrix, shifted);
    // Projector onto the retained eigenspace.
    const auto eig = symmetric_eigen(c);
    Matrix proj(p, p);
    for (std::size_t e = 0; e < p; ++e) {
      if (ridge == 0.0 && eig.values[e] <= 1e-10 * eig.values[0]) continue;
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) proj(i, j) += eig.vectors(i, e) * eig.vectors(j, e);
    }
    CHECK(dime::testing::max_abs_diff(prod, proj) < 1e-8);
    CHECK(inv.effective_rank == (ridge > 0 ? p : rank));
  }
}

TEST_CASE("ecdf examples") {
  const Ecdf e(std::vector<double>{4, 2, 3, 1});
  CHECK(e.eval(2) == 0.5);
  CHECK(e.eval(0.5) == 0.0);
  CHECK(e.eval(4) == 1.0);
  CHECK(e.eval(100) == 1.0);
  CHECK(e.survival(2) == 0.5);
  CHECK(ecdf_eval(ecdf_fit(std::vector<double>{1, 2, 3, 4}), 2.5) == 0.5);
  CHECK(std::vector<double>(e.sorted_values().begin(), e.sorted_values().end()) == std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(Ecdf(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(Ecdf(std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()}), ValidationError);
}

TEST_CASE("ecdf agrees with naive counting and is nondecreasing") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> values(1 + rng.below(30));
    for (double& v : values) v = static_cast<double>(rng.below(10));  // plenty of ties
    const Ecdf e(values);
    double prev = 0.0;
    for (double x = -1.0; x <= 11.0; x += 0.5) {
      const auto count = std::count_if(values.begin(), values.end(), [&](double v) { return v <= x; });
      const double expected = static_cast<double>(count) / static_cast<double>(values.size());
      CHECK(e.eval(x) == expected);
      CHECK(e.survival(x) == static_cast<double>(values.size() - count) / static_cast<double>(values.size()));
      CHECK(e.eval(x) >= prev);
      prev = e.eval(x);
    }
  }
}

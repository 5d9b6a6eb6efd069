#include "doctest.h"

#include "dime_scope/dime.hpp"
#include "dime_scope/error.hpp"
#include "test_support.hpp"

using namespace dime;
using dime::testing::random_matrix;
using dime::testing::relative_diff;

namespace {

double squared_norm(std::span<const double> v) { return dot(v, v); }

}  // namespace

TEST_CASE("rank specs print and parse") {
  CHECK(to_string(RankSpec{ExplainedVariance{0.99}}) == "r=0.99");
  CHECK(to_string(RankSpec{ExplicitRank{3}}) == "k=3");
  CHECK(parse_rank_spec("r=0.999") == RankSpec{ExplainedVariance{0.999}});
  CHECK(parse_rank_spec("k=12") == RankSpec{ExplicitRank{12}});
  CHECK_THROWS_AS(parse_rank_spec("r=1.5"), ValidationError);
  CHECK_THROWS_AS(parse_rank_spec("r=0"), ValidationError);
  CHECK_THROWS_AS(parse_rank_spec("k=0"), ValidationError);
  CHECK_THROWS_AS(parse_rank_spec("q=2"), ValidationError);
}

TEST_CASE("rank-one training data gives a one-dimensional model") {
  const Matrix train{{1, 0}, {-2, 0}, {3, 0}, {0.5, 0}};
  const auto model = fit(train, ExplainedVariance{0.99});
  CHECK(model.k == 1);
  CHECK(std::abs(std::abs(model.basis(0, 0)) - 1.0) < 1e-14);
  CHECK(std::abs(model.basis(1, 0)) < 1e-14);
  CHECK(model.r_requested == 0.99);
  CHECK(dime_score(model, std::vector<double>{3, 4}) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(dime_score(model, std::vector<double>{-7, 0}) < 1e-12);
}

TEST_CASE("full-rank model reconstructs everything") {
  const Matrix train{{5, 0}, {0, 5}};
  const auto model = fit(train, ExplicitRank{2});
  CHECK(model.k == 2);
  CHECK(dime::testing::max_abs_diff(multiply_at_b(model.basis, model.basis), Matrix::identity(2)) < 1e-14);
  Rng rng(1);
  const Matrix q = random_matrix(rng, 10, 2, 100.0);
  for (double d : dime_score(model, q)) CHECK(d < 1e-10);
}

TEST_CASE("d_within under a diagonal projected covariance") {
  const double a = 2.0 * std::sqrt(2.0), b = std::sqrt(2.0);
  const Matrix train{{a, 0}, {-a, 0}, {0, b}, {0, -b}};  // covariance diag(4, 1)
  const auto model = fit(train, ExplicitRank{2});
  CHECK(d_within(model, std::vector<double>{2, 1}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(model.within_inverse_cov.effective_rank == 2);
}

TEST_CASE("d_within is zero off the hyperplane while dime is not") {
  Rng rng(2);
  Matrix train(50, 3);
  for (std::size_t i = 0; i < 50; ++i) {
    train(i, 0) = rng.normal();
    train(i, 1) = rng.normal();
  }
  const auto model = fit(train, ExplicitRank{2});
  const std::vector<double> off{0, 0, 7};
  CHECK(d_within(model, off) < 1e-12);
  CHECK(dime_score(model, off) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("batched and single-row scoring agree") {
  Rng rng(3);
  const Matrix train = dime::testing::low_rank_plus_noise(rng, 200, 12, 4, 0.05);
  const auto model = fit(train, ExplainedVariance{0.9}, true);
  const Matrix q = random_matrix(rng, 17, 12);
  const auto both = score_batch(model, q);
  const auto dimes = dime_score(model, q);
  const auto within = d_within(model, q);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    CHECK(both.dime[i] == dimes[i]);
    CHECK(both.within[i] == within[i]);
    CHECK(dime_score(model, q.row(i)) == dimes[i]);
    CHECK(d_within(model, q.row(i)) == within[i]);
  }
}

TEST_CASE("fit validates its input") {
  CHECK_THROWS_AS(fit(Matrix{{1, 2}}, ExplainedVariance{0.99}), ValidationError);
  CHECK_THROWS_AS(fit(Matrix(3, 2), ExplainedVariance{0.99}), ValidationError);
  CHECK_THROWS_AS(fit(Matrix{{1, 0}, {2, 0}}, ExplicitRank{2}), ValidationError);
  CHECK_THROWS_AS(fit(Matrix{{1, 0}, {2, 0}}, ExplicitRank{3}), ValidationError);
  CHECK_THROWS_AS(fit(Matrix{{1, 0}, {2, std::numeric_limits<double>::quiet_NaN()}}, ExplicitRank{1}),
                  ValidationError);
  CHECK_THROWS_AS(fit(Matrix{{1, 0}, {2, 1}}, ExplainedVariance{0.0}), ValidationError);
  CHECK_THROWS_AS(fit(Matrix{{1, 0}, {2, 1}}, ExplainedVariance{1.5}), ValidationError);
}

TEST_CASE("r-based rank is capped at the numerical rank") {
  Rng rng(4);
  const Matrix train = dime::testing::low_rank_plus_noise(rng, 30, 6, 2, 0.0);
  const auto model = fit(train, ExplainedVariance{1.0});
  CHECK(model.k == 2);
  CHECK(model.within_inverse_cov.effective_rank == 2);
}

TEST_CASE("dimension mismatch names expected and actual width") {
  const auto model = fit(Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, ExplicitRank{2});
  try {
    dime_score(model, Matrix{{1, 2}});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("p=3") != std::string::npos);
    CHECK(std::string(e.what()).find("p=2") != std::string::npos);
  }
  CHECK_THROWS_AS(d_within(model, std::vector<double>{1, 2, 3, 4}), ValidationError);
  CHECK_THROWS_AS(dime_score(model, std::vector<double>{1, std::numeric_limits<double>::infinity(), 0}),
                  ValidationError);
}

TEST_CASE("pythagoras and the training residual identity") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(40), p = 2 + rng.below(15);
    const Matrix train = random_matrix(rng, n, p);
    const auto svd = right_svd(train);
    const std::size_t k = 1 + rng.below(numerical_rank(svd.sigma));
    const auto model = fit(train, ExplicitRank{k});
    const auto scored = dime_score(model, train);
    double total = 0.0, tail = 0.0;
    for (double d : scored) total += d * d;
    for (std::size_t i = k; i < svd.sigma.size(); ++i) tail += svd.sigma[i] * svd.sigma[i];
    if (tail > 1e-12) CHECK(relative_diff(total, tail) < 1e-8);

    const Matrix q = random_matrix(rng, 5, p, 3.0);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      const auto row = q.row(i);
      double proj2 = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        double c = 0.0;
        for (std::size_t f = 0; f < p; ++f) c += row[f] * model.basis(f, j);
        proj2 += c * c;
      }
      const double d = dime_score(model, row);
      CHECK(relative_diff(squared_norm(row), proj2 + d * d) < 1e-8);
    }
  }
}

TEST_CASE("scale equivariance and rotation invariance") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 3 + rng.below(8);
    const Matrix train = dime::testing::low_rank_plus_noise(rng, 60, p, 2, 0.1);
    const Matrix q = random_matrix(rng, 6, p);
    const auto base = fit(train, ExplicitRank{2});
    const auto base_d = dime_score(base, q);

    const double c = 0.5 + 3.0 * rng.uniform();
    const auto scaled = fit(c * train, ExplicitRank{2});
    const auto scaled_d = dime_score(scaled, c * q);
    for (std::size_t i = 0; i < q.rows(); ++i) CHECK(relative_diff(scaled_d[i], c * base_d[i]) < 1e-8);

    const Matrix rot = dime::testing::random_orthogonal(rng, p);
    const auto rotated = fit(multiply(train, rot), ExplicitRank{2});
    const auto rotated_d = dime_score(rotated, multiply(q, rot));
    const auto rotated_w = d_within(rotated, multiply(q, rot));
    const auto base_w = d_within(base, q);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      CHECK(std::abs(rotated_d[i] - base_d[i]) < 1e-8);
      CHECK(std::abs(rotated_w[i] - base_w[i]) < 1e-8);
    }
  }
}

TEST_CASE("centering removes the mean direction") {
  Rng rng(7);
  Matrix train = dime::testing::low_rank_plus_noise(rng, 300, 5, 1, 0.01);
  for (std::size_t i = 0; i < train.rows(); ++i) train(i, 4) += 100.0;
  const auto centered = fit(train, ExplicitRank{1}, true);
  REQUIRE(centered.center);
  CHECK((*centered.center)[4] == doctest::Approx(100.0).epsilon(1e-3));
  // The offset row itself sits on the centered hyperplane.
  CHECK(dime_score(centered, *centered.center) < 1e-12);
  const auto plain = fit(train, ExplicitRank{1});
  CHECK(!plain.center);
  CHECK(std::abs(std::abs(plain.basis(4, 0)) - 1.0) < 1e-3);
}

TEST_CASE("fit is deterministic") {
  Rng rng(8);
  const Matrix train = random_matrix(rng, 40, 7);
  const auto a = fit(train, ExplainedVariance{0.95});
  const auto b = fit(train, ExplainedVariance{0.95});
  CHECK(a.basis == b.basis);
  CHECK(a.sigma == b.sigma);
  CHECK(a.within_inverse_cov.matrix == b.within_inverse_cov.matrix);
}

#include "doctest.h"

#include <numeric>

#include "dime_scope/error.hpp"
#include "dime_scope/mahalanobis.hpp"
#include "test_support.hpp"

using namespace dime;
using dime::testing::naive_inverse;
using dime::testing::random_matrix;

namespace {

// Independent reimplementation: explicit loops and a Gauss-Jordan inverse.
struct NaiveClassModel {
  std::vector<std::vector<double>> centroids;
  Matrix inverse;
};

NaiveClassModel naive_fit(const Matrix& x, const std::vector<int>& labels, std::size_t classes) {
  const std::size_t n = x.rows(), p = x.cols();
  NaiveClassModel m{std::vector<std::vector<double>>(classes, std::vector<double>(p, 0.0)), Matrix(p, p)};
  std::vector<double> counts(classes, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    counts[labels[r]] += 1.0;
    for (std::size_t j = 0; j < p; ++j) m.centroids[labels[r]][j] += x(r, j);
  }
  for (std::size_t c = 0; c < classes; ++c)
    for (double& v : m.centroids[c]) v /= counts[c];
  Matrix cov(p, p);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        cov(i, j) += (x(r, i) - m.centroids[labels[r]][i]) * (x(r, j) - m.centroids[labels[r]][j]) / static_cast<double>(n);
  m.inverse = naive_inverse(cov);
  return m;
}

double naive_score(const NaiveClassModel& m, std::span<const double> phi) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& mu : m.centroids) {
    double q = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
      for (std::size_t j = 0; j < phi.size(); ++j) q += (phi[i] - mu[i]) * m.inverse(i, j) * (phi[j] - mu[j]);
    best = std::min(best, std::sqrt(q));
  }
  return -best;
}

ClassMahalanobisModel two_centroids(const Matrix& inverse) {
  ClassMahalanobisModel m;
  m.centroids = Matrix{{0, 0}, {10, 0}};
  m.inverse_cov.matrix = inverse;
  m.class_counts = {1, 1};
  return m;
}

}  // namespace

TEST_CASE("simple model fit examples") {
  const auto m = fit_simple(Matrix{{1, 0}, {-1, 0}}, 0.0);
  CHECK(m.mean == std::vector<double>{0, 0});
  CHECK(dime::testing::max_abs_diff(m.inverse_cov.matrix, Matrix{{1, 0}, {0, 0}}) < 1e-15);
  CHECK(m.inverse_cov.effective_rank == 1);

  const auto r = fit_simple(Matrix{{2, 3}, {2, 3}, {2, 3}}, 1.0);
  CHECK(dime::testing::max_abs_diff(r.inverse_cov.matrix, Matrix::identity(2)) < 1e-15);

  Rng rng(1);
  const Matrix x = random_matrix(rng, 30, 4);
  const auto a = fit_simple(x), b = fit_simple(x);
  CHECK(a.mean == b.mean);
  CHECK(a.inverse_cov.matrix == b.inverse_cov.matrix);
  CHECK_THROWS_AS(fit_simple(Matrix{{1, 2}}), ValidationError);
  CHECK_THROWS_AS(fit_simple(x, -1.0), ValidationError);
}

TEST_CASE("simple distance examples") {
  MahalanobisModel m{{0, 0}, {Matrix{{0.25, 0}, {0, 1}}, 0.0, 2}};
  CHECK(simple_distance(m, std::vector<double>{2, 1}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(simple_distance(m, std::vector<double>{0, 0}) == 0.0);

  MahalanobisModel euclid{{1, -2, 3}, {Matrix::identity(3), 0.0, 3}};
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> phi{rng.normal(), rng.normal(), rng.normal()};
    const double d = std::sqrt((phi[0] - 1) * (phi[0] - 1) + (phi[1] + 2) * (phi[1] + 2) + (phi[2] - 3) * (phi[2] - 3));
    CHECK(simple_distance(euclid, phi) == doctest::Approx(d).epsilon(1e-15));
  }
  CHECK_THROWS_AS(simple_distance(euclid, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("mahalanobis distance is affine invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 2 + rng.below(5);
    const Matrix x = random_matrix(rng, 40, p);
    Matrix a = random_matrix(rng, p, p);
    for (std::size_t i = 0; i < p; ++i) a(i, i) += 3.0;
    const Matrix q = random_matrix(rng, 5, p);
    const auto base = simple_distances(fit_simple(x), q);
    const auto moved = simple_distances(fit_simple(multiply(x, a)), multiply(q, a));
    for (std::size_t i = 0; i < q.rows(); ++i) CHECK(std::abs(base[i] - moved[i]) < 1e-6);
  }
}

TEST_CASE("class score examples") {
  const auto m = two_centroids(Matrix::identity(2));
  auto s = class_score(m, std::vector<double>{1, 0});
  CHECK(s.closest_class == 0);
  CHECK(s.score == doctest::Approx(-1.0).epsilon(1e-15));
  s = class_score(m, std::vector<double>{10, 0});
  CHECK(s.score == 0.0);
  CHECK(s.closest_class == 1);
  s = class_score(m, std::vector<double>{5, 0});
  CHECK(s.closest_class == 0);
  CHECK(s.score == doctest::Approx(-5.0).epsilon(1e-15));
  CHECK_THROWS_AS(class_score(m, std::vector<double>{1, 2, 3}), ValidationError);
}

TEST_CASE("closest class is Euclidean even when the Mahalanobis minimum is elsewhere") {
  ClassMahalanobisModel m;
  m.centroids = Matrix{{0, 0}, {3, 3}};
  m.inverse_cov.matrix = Matrix{{0.01, 0}, {0, 100}};
  m.class_counts = {1, 1};
  // Euclidean: 2.002 vs 3.07. Mahalanobis²: 400.0001 vs 100.0841.
  const auto s = class_score(m, std::vector<double>{0.1, 2.0});
  CHECK(s.closest_class == 0);
  CHECK(s.score == doctest::Approx(-std::sqrt(0.01 * 8.41 + 100.0)).epsilon(1e-12));
}

TEST_CASE("fit_class recovers centroids of two separated clusters") {
  Rng rng(4);
  const std::size_t m = 200;
  Matrix x(2 * m, 2);
  std::vector<int> labels(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    // symmetric noise: each draw paired with its negation
    const double a = rng.normal(), b = rng.normal();
    const double sign = i % 2 ? -1.0 : 1.0;
    x(i, 0) = sign * a;
    x(i, 1) = sign * b;
    x(m + i, 0) = 10.0 + sign * a;
    x(m + i, 1) = sign * b;
    labels[m + i] = 1;
  }
  const auto model = fit_class(x, labels);
  CHECK(model.classes() == 2);
  CHECK(model.class_counts == std::vector<std::size_t>{m, m});
  CHECK(std::abs(model.centroids(0, 0)) < 0.2);
  CHECK(std::abs(model.centroids(1, 0) - 10.0) < 0.2);
  CHECK(std::abs(model.centroids(0, 1)) < 0.2);
}

TEST_CASE("single-point classes give a zero pooled covariance") {
  const Matrix x{{0, 0}, {10, 0}, {0, 0}};
  const auto pinv = fit_class(x, std::vector<int>{0, 1, 0}, 0.0);
  CHECK(pinv.inverse_cov.matrix == Matrix(2, 2));
  CHECK(pinv.inverse_cov.effective_rank == 0);
  const auto ridged = fit_class(x, std::vector<int>{0, 1, 0}, 1.0);
  CHECK(dime::testing::max_abs_diff(ridged.inverse_cov.matrix, Matrix::identity(2)) < 1e-15);
}

TEST_CASE("fit_class validates labels") {
  const Matrix x{{0, 0}, {1, 0}, {2, 0}, {3, 1}};
  CHECK_THROWS_AS(fit_class(x, std::vector<int>{0, 2, 0, 2}), ValidationError);  // class 1 empty
  CHECK_THROWS_AS(fit_class(x, std::vector<int>{0, 1, 0}), ValidationError);     // length
  CHECK_THROWS_AS(fit_class(x, std::vector<int>{0, -1, 0, 1}), ValidationError);
  CHECK_THROWS_AS(fit_class(Matrix{{0, 0}, {1, 1}}, std::vector<int>{0, 1}), ValidationError);  // n < K+1
}

TEST_CASE("consistent permutation of rows and labels gives the same model") {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 30, 3);
  std::vector<int> labels(30);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  labels[0] = 0;
  labels[1] = 1;
  labels[2] = 2;
  std::vector<std::size_t> order(30);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::vector<int> permuted_labels(30);
  for (std::size_t i = 0; i < 30; ++i) permuted_labels[i] = labels[order[i]];
  const auto a = fit_class(x, labels);
  const auto b = fit_class(x.select_rows(order), permuted_labels);
  CHECK(dime::testing::max_abs_diff(a.centroids, b.centroids) < 1e-12);
  CHECK(dime::testing::max_abs_diff(a.inverse_cov.matrix, b.inverse_cov.matrix) < 1e-10);
}

TEST_CASE("class score matches a naive oracle on random two-class data") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_matrix(rng, 20, 3);
    std::vector<int> labels(20);
    for (std::size_t i = 0; i < 20; ++i) labels[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
    const auto model = fit_class(x, labels);
    const auto oracle = naive_fit(x, labels, 2);
    const Matrix q = random_matrix(rng, 10, 3, 2.0);
    const auto scores = class_scores(model, q);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      CHECK(std::abs(scores[i].score - naive_score(oracle, q.row(i))) < 1e-8);
      CHECK(scores[i].score <= 0.0);
    }
  }
}

TEST_CASE("one class reduces to the simple distance") {
  Rng rng(7);
  const Matrix x = random_matrix(rng, 25, 4);
  const auto cls = fit_class(x, std::vector<int>(25, 0));
  const auto simple = fit_simple(x);
  const Matrix q = random_matrix(rng, 8, 4);
  const auto s = class_scores(cls, q);
  const auto d = simple_distances(simple, q);
  for (std::size_t i = 0; i < q.rows(); ++i) CHECK(std::abs(s[i].score + d[i]) < 1e-10);
}

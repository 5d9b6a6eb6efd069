#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "dime_scope/baselines.hpp"
#include "dime_scope/error.hpp"
#include "test_support.hpp"

using namespace dime;

TEST_CASE("softmax confidence examples") {
  CHECK(softmax_confidence(Matrix{{0, 0, 0, 0}})[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(std::abs(softmax_confidence(Matrix{{std::log(6.0), std::log(2.0), std::log(2.0)}})[0] - 0.6) <= 1e-9);
  const double saturated = softmax_confidence(Matrix{{1000, 0}})[0];
  CHECK(std::isfinite(saturated));
  CHECK(std::abs(saturated - 1.0) <= 1e-12);
  CHECK(softmax_confidence(Matrix{{-1000, -1000}})[0] == 0.5);
}

TEST_CASE("softmax confidence validates input") {
  CHECK_THROWS_AS(softmax_confidence(Matrix{{1}}), ValidationError);
  CHECK_THROWS_AS(softmax_confidence(Matrix{{1, std::numeric_limits<double>::infinity()}}), ValidationError);
}

TEST_CASE("softmax confidence range and shift invariance") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    Matrix logits(1, k), shifted(1, k);
    const double c = 50.0 * rng.normal();
    for (std::size_t j = 0; j < k; ++j) {
      logits(0, j) = 5.0 * rng.normal();
      shifted(0, j) = logits(0, j) + c;
    }
    const double conf = softmax_confidence(logits)[0];
    CHECK(conf >= 1.0 / static_cast<double>(k) - 1e-15);
    CHECK(conf <= 1.0);
    CHECK(std::abs(conf - softmax_confidence(shifted)[0]) <= 1e-12);
  }
}

TEST_CASE("predictive entropy examples") {
  CHECK(predictive_entropy(make_sample_stack(Matrix{{1, 0}, {1, 0}}, 2))[0] == 0.0);
  CHECK(std::abs(predictive_entropy(make_sample_stack(Matrix{{1, 0}, {0, 1}}, 2))[0] - std::log(2.0)) <= 1e-12);
  const double h = predictive_entropy(make_sample_stack(Matrix{{0.8, 0.2}, {0.6, 0.4}}, 2))[0];
  CHECK(std::abs(h - 0.6108643020548935) <= 1e-9);
}

TEST_CASE("sample stacks split row blocks in order") {
  // Two samples of two observations each.
  const auto stack = make_sample_stack(Matrix{{1, 0}, {0.5, 0.5}, {0, 1}, {0.5, 0.5}}, 2);
  CHECK(stack.sample_count() == 2);
  CHECK(stack.observations() == 2);
  const auto h = predictive_entropy(stack);
  CHECK(std::abs(h[0] - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(h[1] - std::log(2.0)) <= 1e-12);

  const auto from_logits = make_sample_stack(Matrix{{0, 0}, {0, 0}}, 2, true);
  CHECK(std::abs(predictive_entropy(from_logits)[0] - std::log(2.0)) <= 1e-12);
}

TEST_CASE("sample stacks validate probabilities and block counts") {
  CHECK_THROWS_AS(make_sample_stack(Matrix{{0.5, 0.4}, {0.5, 0.5}}, 2), ValidationError);
  CHECK_THROWS_AS(make_sample_stack(Matrix{{1.5, -0.5}, {0.5, 0.5}}, 2), ValidationError);
  CHECK_THROWS_AS(make_sample_stack(Matrix{{1, 0}, {1, 0}, {1, 0}}, 2), ValidationError);
  CHECK_THROWS_AS(make_sample_stack(Matrix{{1, 0}}, 1), ValidationError);
  CHECK_NOTHROW(make_sample_stack(Matrix{{0.5, 0.5 + 5e-7}, {0.5, 0.5}}, 2));
}

TEST_CASE("predictive entropy range, invariances and one-hot zero") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(6), m = 2 + rng.below(5);
    Matrix stacked(m, k);
    for (std::size_t s = 0; s < m; ++s) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += (stacked(s, j) = rng.uniform() < 0.3 ? 0.0 : rng.uniform());
      if (sum == 0.0) stacked(s, 0) = sum = 1.0;
      for (std::size_t j = 0; j < k; ++j) stacked(s, j) /= sum;
    }
    const double h = predictive_entropy(make_sample_stack(stacked, m))[0];
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    Matrix permuted(m, k), reordered(m, k);
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t j = 0; j < k; ++j) {
        permuted(s, j) = stacked(s, perm[j]);
        reordered(s, j) = stacked(m - 1 - s, j);
      }
    CHECK(std::abs(predictive_entropy(make_sample_stack(permuted, m))[0] - h) <= 1e-12);
    CHECK(std::abs(predictive_entropy(make_sample_stack(reordered, m))[0] - h) <= 1e-12);
  }
  Matrix one_hot(3, 4);
  for (std::size_t s = 0; s < 3; ++s) one_hot(s, 2) = 1.0;
  CHECK(predictive_entropy(make_sample_stack(one_hot, 3))[0] == 0.0);
  CHECK(predictive_entropy(make_sample_stack(Matrix{{0.999, 0.001}, {1, 0}}, 2))[0] > 0.0);
}

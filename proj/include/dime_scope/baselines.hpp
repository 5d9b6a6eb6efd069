#pragma once

// Confidence-based baselines computed from classifier outputs supplied as
// files. Nothing here runs a network.

#include <cstddef>
#include <vector>

#include "dime_scope/matrix.hpp"

namespace dime {

// Max softmax probability per row of an n×K logit matrix (K ≥ 2).
// Lower confidence is more anomalous.
std::vector<double> softmax_confidence(const Matrix& logits);

// M Monte-Carlo predictions, each an n×K matrix of class probabilities.
struct McSampleStack {
  std::vector<Matrix> samples;

  std::size_t sample_count() const { return samples.size(); }
  std::size_t observations() const { return samples.empty() ? 0 : samples.front().rows(); }
  std::size_t classes() const { return samples.empty() ? 0 : samples.front().cols(); }
};

// Splits an (M·n)×K matrix into M consecutive row blocks. With
// `from_logits`, each row is passed through softmax first; otherwise rows
// must be nonnegative and sum to 1 within 1e-6.
McSampleStack make_sample_stack(const Matrix& stacked, std::size_t sample_count, bool from_logits = false);

// Entropy (nats) of the mean predictive distribution, 0·ln 0 = 0.
// Higher entropy is more anomalous.
std::vector<double> predictive_entropy(const McSampleStack& stack);

}  // namespace dime

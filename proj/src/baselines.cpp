#include "dime_scope/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dime_scope/error.hpp"

namespace dime {

namespace {

void softmax_row(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
}

}  // namespace

std::vector<double> softmax_confidence(const Matrix& logits) {
  if (logits.cols() < 2) throw ValidationError("softmax_confidence: need at least 2 classes");
  require_finite(logits, "logits");
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    // The largest term is exp(0) = 1.
    out[i] = 1.0 / sum;
  }
  return out;
}

McSampleStack make_sample_stack(const Matrix& stacked, std::size_t sample_count, bool from_logits) {
  if (sample_count < 2) throw ValidationError("mc samples: need at least 2 samples");
  if (stacked.rows() % sample_count != 0) {
    throw ValidationError("mc samples: " + std::to_string(stacked.rows()) + " rows do not split into " +
                          std::to_string(sample_count) + " equal blocks");
  }
  if (stacked.cols() < 2) throw ValidationError("mc samples: need at least 2 classes");
  require_finite(stacked, "mc samples");
  const std::size_t n = stacked.rows() / sample_count;
  const std::size_t classes = stacked.cols();
  McSampleStack stack;
  stack.samples.reserve(sample_count);
  for (std::size_t m = 0; m < sample_count; ++m) {
    Matrix block(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = stacked.row(m * n + i);
      auto dst = block.row(i);
      if (from_logits) {
        softmax_row(src, dst);
        continue;
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        if (src[k] < 0.0) {
          throw ValidationError("mc samples: negative probability in sample " + std::to_string(m) + ", row " +
                                std::to_string(i));
        }
        dst[k] = src[k];
        sum += src[k];
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError("mc samples: probabilities in sample " + std::to_string(m) + ", row " +
                              std::to_string(i) + " sum to " + std::to_string(sum));
      }
    }
    stack.samples.push_back(std::move(block));
  }
  return stack;
}

std::vector<double> predictive_entropy(const McSampleStack& stack) {
  if (stack.sample_count() < 2) throw ValidationError("predictive_entropy: need at least 2 samples");
  const std::size_t n = stack.observations();
  const std::size_t classes = stack.classes();
  for (const auto& s : stack.samples) {
    if (s.rows() != n || s.cols() != classes) throw ValidationError("predictive_entropy: sample shapes differ");
  }
  const double inv_m = 1.0 / static_cast<double>(stack.sample_count());
  std::vector<double> out(n);
  std::vector<double> mean(classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (const auto& s : stack.samples) {
      auto row = s.row(i);
      for (std::size_t k = 0; k < classes; ++k) mean[k] += row[k];
    }
    double h = 0.0;
    for (double pk : mean) {
      pk *= inv_m;
      if (pk > 0.0) h -= pk * std::log(pk);
    }
    out[i] = std::max(h, 0.0);
  }
  return out;
}

}  // namespace dime

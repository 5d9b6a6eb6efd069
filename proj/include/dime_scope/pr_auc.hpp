#pragma once

#include <span>
#include <vector>

namespace dime {

// Scores oriented so that larger means more anomalous; OOD is the positive
// class.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<bool> is_ood;
};

// Builds a set from in-distribution and OOD score vectors.
ScoredSet make_scored_set(std::span<const double> in_scores, std::span<const double> ood_scores);

// Non-interpolated average precision: thresholds visited in descending score
// order with tied scores forming a single step, AP = Σ ΔRecall · Precision.
double pr_auc(const ScoredSet& set);

}  // namespace dime

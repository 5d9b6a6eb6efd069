#include "dime_scope/pr_auc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dime_scope/error.hpp"

namespace dime {

ScoredSet make_scored_set(std::span<const double> in_scores, std::span<const double> ood_scores) {
  ScoredSet set;
  set.scores.reserve(in_scores.size() + ood_scores.size());
  set.scores.insert(set.scores.end(), in_scores.begin(), in_scores.end());
  set.scores.insert(set.scores.end(), ood_scores.begin(), ood_scores.end());
  set.is_ood.assign(in_scores.size(), false);
  set.is_ood.resize(set.scores.size(), true);
  return set;
}

double pr_auc(const ScoredSet& set) {
  if (set.scores.size() != set.is_ood.size()) throw ValidationError("pr_auc: scores and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count(set.is_ood.begin(), set.is_ood.end(), true));
  if (positives == 0 || positives == set.scores.size()) {
    throw ValidationError("pr_auc: need at least one in-distribution and one OOD observation");
  }
  for (double s : set.scores) {
    if (std::isnan(s)) throw ValidationError("pr_auc: NaN score");
  }

  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });

  double ap = 0.0;
  double previous_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = set.scores[order[i]];
    while (i < order.size() && set.scores[order[i]] == threshold) {
      if (set.is_ood[order[i]]) ++tp;
      ++seen;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - previous_recall) * precision;
    previous_recall = recall;
  }
  return ap;
}

}  // namespace dime

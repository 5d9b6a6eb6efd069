#pragma once

// Converts distances to in-distribution probabilities by comparing them with
// the distances of a held-out validation set.

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dime_scope/dime.hpp"
#include "dime_scope/mahalanobis.hpp"
#include "dime_scope/numerics.hpp"

namespace dime {

enum class Metric { kDime, kDWithin, kMahalanobis, kClassMahalanobis };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

using DistanceModel = std::variant<ModelledEmbedding, MahalanobisModel, ClassMahalanobisModel>;

std::size_t model_width(const DistanceModel& model);
// Throws unless `metric` can be evaluated on `model`.
void check_metric(const DistanceModel& model, Metric metric);
// Nonnegative distance per row; larger is more anomalous. For the class
// model this is min_k D_M, the negation of the class score.
std::vector<double> distances(const DistanceModel& model, Metric metric, const Matrix& phi);

struct CalibratedScorer {
  DistanceModel model;
  Metric metric = Metric::kDime;
  Ecdf ecdf;
};

CalibratedScorer calibrate(DistanceModel model, const Matrix& validation, Metric metric);

// 1 − ECDF(distance): the fraction of validation distances strictly greater.
double probability_from_distance(const CalibratedScorer& scorer, double distance);
double probability(const CalibratedScorer& scorer, std::span<const double> phi);
std::vector<double> probabilities(const CalibratedScorer& scorer, const Matrix& phi);

// True iff probability < alpha; alpha in (0, 1).
bool is_ood(const CalibratedScorer& scorer, std::span<const double> phi, double alpha);
bool is_ood_probability(double probability, double alpha);

}  // namespace dime

#include "dime_scope/calibration.hpp"

#include <string>

#include "dime_scope/error.hpp"

namespace dime {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kDime:
      return "dime";
    case Metric::kDWithin:
      return "d_within";
    case Metric::kMahalanobis:
      return "mahalanobis";
    case Metric::kClassMahalanobis:
      return "class_mahalanobis";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "dime") return Metric::kDime;
  if (name == "d_within" || name == "d-within") return Metric::kDWithin;
  if (name == "mahalanobis") return Metric::kMahalanobis;
  if (name == "class_mahalanobis" || name == "class-mahalanobis" || name == "deep_mahalanobis") {
    return Metric::kClassMahalanobis;
  }
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

std::size_t model_width(const DistanceModel& model) {
  return std::visit([](const auto& m) { return m.width(); }, model);
}

void check_metric(const DistanceModel& model, Metric metric) {
  const bool ok = std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ModelledEmbedding>) return metric == Metric::kDime || metric == Metric::kDWithin;
        if constexpr (std::is_same_v<T, MahalanobisModel>) return metric == Metric::kMahalanobis;
        if constexpr (std::is_same_v<T, ClassMahalanobisModel>) return metric == Metric::kClassMahalanobis;
      },
      model);
  if (!ok) throw ValidationError("metric '" + std::string(to_string(metric)) + "' does not apply to this model");
}

std::vector<double> distances(const DistanceModel& model, Metric metric, const Matrix& phi) {
  check_metric(model, metric);
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ModelledEmbedding>) {
          return metric == Metric::kDime ? dime_score(m, phi) : d_within(m, phi);
        } else if constexpr (std::is_same_v<T, MahalanobisModel>) {
          return simple_distances(m, phi);
        } else {
          const auto scores = class_scores(m, phi);
          std::vector<double> out(scores.size());
          for (std::size_t i = 0; i < scores.size(); ++i) out[i] = -scores[i].score;
          return out;
        }
      },
      model);
}

CalibratedScorer calibrate(DistanceModel model, const Matrix& validation, Metric metric) {
  if (validation.rows() == 0) throw ValidationError("calibrate: validation set is empty");
  auto d = distances(model, metric, validation);
  Ecdf ecdf(d);
  return CalibratedScorer{std::move(model), metric, std::move(ecdf)};
}

double probability_from_distance(const CalibratedScorer& scorer, double distance) {
  return scorer.ecdf.survival(distance);
}

std::vector<double> probabilities(const CalibratedScorer& scorer, const Matrix& phi) {
  auto d = distances(scorer.model, scorer.metric, phi);
  for (double& v : d) v = probability_from_distance(scorer, v);
  return d;
}

double probability(const CalibratedScorer& scorer, std::span<const double> phi) {
  return probabilities(scorer, Matrix::row_vector(phi)).front();
}

bool is_ood_probability(double probability, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  return probability < alpha;
}

bool is_ood(const CalibratedScorer& scorer, std::span<const double> phi, double alpha) {
  return is_ood_probability(probability(scorer, phi), alpha);
}

}  // namespace dime

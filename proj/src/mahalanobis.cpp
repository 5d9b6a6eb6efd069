#include "dime_scope/mahalanobis.hpp"

#include <algorithm>
#include <string>

#include "dime_scope/error.hpp"
#include "dime_scope/kernels.hpp"

namespace dime {

namespace {

void check_width(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw ValidationError("dimension mismatch: model expects p=" + std::to_string(expected) + ", got p=" +
                          std::to_string(got));
  }
}

}  // namespace

MahalanobisModel fit_simple(const Matrix& train, double ridge) {
  if (train.rows() < 2) throw ValidationError("fit_simple: need at least 2 training rows");
  require_finite(train, "training embeddings");
  MahalanobisModel model;
  model.mean = kernels::column_means(train);
  model.inverse_cov = spd_inverse(covariance(train, std::span<const double>(model.mean)), ridge);
  return model;
}

std::vector<double> simple_distances(const MahalanobisModel& model, const Matrix& phi) {
  check_width(model.width(), phi.cols());
  require_finite(phi, "observations");
  std::vector<double> out(phi.rows());
  kernels::quadratic_norms(phi, model.inverse_cov.matrix, model.mean, out);
  return out;
}

double simple_distance(const MahalanobisModel& model, std::span<const double> phi) {
  return simple_distances(model, Matrix::row_vector(phi)).front();
}

ClassMahalanobisModel fit_class(const Matrix& train, std::span<const int> labels, double ridge) {
  if (labels.size() != train.rows()) {
    throw ValidationError("fit_class: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(train.rows()) + " rows");
  }
  if (train.rows() == 0) throw ValidationError("fit_class: no training rows");
  require_finite(train, "training embeddings");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw ValidationError("fit_class: negative class label");
  const auto classes = static_cast<std::size_t>(max_label) + 1;
  if (train.rows() < classes + 1) {
    throw ValidationError("fit_class: need at least K+1=" + std::to_string(classes + 1) + " rows");
  }

  const std::size_t p = train.cols();
  ClassMahalanobisModel model;
  model.centroids = Matrix(classes, p);
  model.class_counts.assign(classes, 0);
  for (std::size_t i = 0; i < train.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++model.class_counts[c];
    auto dst = model.centroids.row(c);
    auto src = train.row(i);
    for (std::size_t j = 0; j < p; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (model.class_counts[c] == 0) throw ValidationError("fit_class: class " + std::to_string(c) + " is empty");
    for (double& v : model.centroids.row(c)) v /= static_cast<double>(model.class_counts[c]);
  }

  Matrix residual = train;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    auto mu = model.centroids.row(static_cast<std::size_t>(labels[i]));
    auto r = residual.row(i);
    for (std::size_t j = 0; j < p; ++j) r[j] -= mu[j];
  }
  const std::vector<double> origin(p, 0.0);
  model.inverse_cov = spd_inverse(covariance(residual, std::span<const double>(origin)), ridge);
  return model;
}

std::vector<ClassScore> class_scores(const ClassMahalanobisModel& model, const Matrix& phi) {
  check_width(model.width(), phi.cols());
  require_finite(phi, "observations");
  std::vector<double> distance(phi.rows());
  std::vector<std::size_t> closest(phi.rows());
  kernels::nearest_centroid(phi, model.centroids, model.inverse_cov.matrix, distance, closest);
  std::vector<ClassScore> out(phi.rows());
  for (std::size_t i = 0; i < phi.rows(); ++i) out[i] = {-distance[i], closest[i]};
  return out;
}

ClassScore class_score(const ClassMahalanobisModel& model, std::span<const double> phi) {
  return class_scores(model, Matrix::row_vector(phi)).front();
}

}  // namespace dime

#pragma once

// Mahalanobis-family comparison metrics in the full feature space.

#include <cstddef>
#include <span>
#include <vector>

#include "dime_scope/matrix.hpp"
#include "dime_scope/numerics.hpp"

namespace dime {

struct MahalanobisModel {
  std::vector<double> mean;
  InverseCovariance inverse_cov;

  std::size_t width() const { return mean.size(); }
};

// Column means and spd_inverse of the 1/n covariance.
MahalanobisModel fit_simple(const Matrix& train, double ridge = 0.0);
double simple_distance(const MahalanobisModel& model, std::span<const double> phi);
std::vector<double> simple_distances(const MahalanobisModel& model, const Matrix& phi);

// Class centroids with one covariance pooled over residuals taken from each
// row's own class centroid.
struct ClassMahalanobisModel {
  Matrix centroids;  // K×p
  InverseCovariance inverse_cov;
  std::vector<std::size_t> class_counts;

  std::size_t width() const { return centroids.cols(); }
  std::size_t classes() const { return centroids.rows(); }
};

// Labels run over [0, K) with every class present; needs n ≥ K + 1.
ClassMahalanobisModel fit_class(const Matrix& train, std::span<const int> labels, double ridge = 0.0);

struct ClassScore {
  double score = 0.0;            // −min_k D_M(φ, k); more negative is more anomalous
  std::size_t closest_class = 0; // Euclidean-nearest centroid, lowest index on ties
};

ClassScore class_score(const ClassMahalanobisModel& model, std::span<const double> phi);
std::vector<ClassScore> class_scores(const ClassMahalanobisModel& model, const Matrix& phi);

}  // namespace dime

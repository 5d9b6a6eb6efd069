#pragma once

// Distance to Modelled Embedding.
//
// Training embeddings are approximated by the hyperplane spanned by their top
// k right singular vectors. An observation's DIME is the norm of what that
// hyperplane fails to reconstruct; D_within is the Mahalanobis norm of its
// coordinates inside the hyperplane.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dime_scope/matrix.hpp"
#include "dime_scope/numerics.hpp"

namespace dime {

// Rank chosen as the smallest k whose cumulative explained-variance ratio
// reaches r.
struct ExplainedVariance {
  double r = 0.99;
  bool operator==(const ExplainedVariance&) const = default;
};

struct ExplicitRank {
  std::size_t k = 1;
  bool operator==(const ExplicitRank&) const = default;
};

using RankSpec = std::variant<ExplainedVariance, ExplicitRank>;

// "r=0.99" or "k=12".
std::string to_string(const RankSpec& spec);
RankSpec parse_rank_spec(std::string_view text);

struct ModelledEmbedding {
  Matrix basis;                              // p×k, orthonormal columns
  std::vector<double> sigma;                 // retained singular values
  std::size_t k = 0;
  std::optional<double> r_requested;         // set when the rank came from r
  VarianceSpectrum spectrum;                 // over all min(n,p) components
  InverseCovariance within_inverse_cov;      // k×k, for D_within
  std::optional<std::vector<double>> center; // subtracted before projecting
  std::size_t n_train = 0;

  std::size_t width() const { return basis.rows(); }
};

// Columns are not centered unless `center` is true. The rank is capped at
// the numerical rank (σ > 1e-10·σ_max) when chosen from r; an explicit k
// above the numerical rank is an error.
ModelledEmbedding fit(const Matrix& train, const RankSpec& rank_spec, bool center = false);

// Both distances from a single projection per row.
struct EmbeddingDistances {
  std::vector<double> dime;
  std::vector<double> within;
};

EmbeddingDistances score_batch(const ModelledEmbedding& model, const Matrix& phi);

std::vector<double> dime_score(const ModelledEmbedding& model, const Matrix& phi);
double dime_score(const ModelledEmbedding& model, std::span<const double> phi);

std::vector<double> d_within(const ModelledEmbedding& model, const Matrix& phi);
double d_within(const ModelledEmbedding& model, std::span<const double> phi);

}  // namespace dime

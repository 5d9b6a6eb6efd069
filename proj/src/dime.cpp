#include "dime_scope/dime.hpp"

#include <charconv>
#include <cmath>

#include "dime_scope/error.hpp"
#include "dime_scope/kernels.hpp"
#include "dime_scope/matrix_io.hpp"

namespace dime {

namespace {

void check_width(const ModelledEmbedding& model, std::size_t p) {
  if (p != model.width()) {
    throw ValidationError("dimension mismatch: model expects p=" + std::to_string(model.width()) + ", got p=" +
                          std::to_string(p));
  }
}

std::span<const double> center_span(const ModelledEmbedding& model) {
  return model.center ? std::span<const double>(*model.center) : std::span<const double>();
}

}  // namespace

std::string to_string(const RankSpec& spec) {
  if (const auto* ev = std::get_if<ExplainedVariance>(&spec)) return "r=" + format_double(ev->r);
  return "k=" + std::to_string(std::get<ExplicitRank>(spec).k);
}

RankSpec parse_rank_spec(std::string_view text) {
  const auto bad = [&] { return ValidationError("invalid rank spec '" + std::string(text) + "' (use r=<ratio> or k=<rank>)"); };
  if (text.size() < 3 || text[1] != '=') throw bad();
  const char* first = text.data() + 2;
  const char* last = text.data() + text.size();
  if (text[0] == 'r') {
    double r = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, r);
    if (ec != std::errc() || ptr != last) throw bad();
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("explained variance r must lie in (0, 1]");
    return ExplainedVariance{r};
  }
  if (text[0] == 'k') {
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec != std::errc() || ptr != last || k == 0) throw bad();
    return ExplicitRank{k};
  }
  throw bad();
}

ModelledEmbedding fit(const Matrix& train, const RankSpec& rank_spec, bool center) {
  if (train.rows() < 2) throw ValidationError("fit: need at least 2 training rows");
  if (train.cols() == 0) throw ValidationError("fit: training matrix has no columns");
  require_finite(train, "training embeddings");

  ModelledEmbedding model;
  model.n_train = train.rows();
  Matrix x = train;
  if (center) {
    auto means = kernels::column_means(train);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto r = x.row(i);
      for (std::size_t j = 0; j < x.cols(); ++j) r[j] -= means[j];
    }
    model.center = std::move(means);
  }

  const RightSvd svd = right_svd(x);
  const std::size_t rank = numerical_rank(svd.sigma);
  if (rank == 0) throw ValidationError("fit: training matrix is all zero after centering");
  model.spectrum = variance_spectrum(svd.sigma, x.rows());

  if (const auto* ev = std::get_if<ExplainedVariance>(&rank_spec)) {
    model.r_requested = ev->r;
    model.k = std::min(select_rank(model.spectrum, ev->r), rank);
  } else {
    const std::size_t k = std::get<ExplicitRank>(rank_spec).k;
    const std::size_t kmax = svd.sigma.size();
    if (k < 1 || k > kmax) {
      throw ValidationError("fit: k=" + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
    }
    if (k > rank) {
      throw ValidationError("fit: k=" + std::to_string(k) + " exceeds the numerical rank " + std::to_string(rank) +
                            " of the training matrix");
    }
    model.k = k;
  }

  const std::size_t p = x.cols();
  model.basis = Matrix(p, model.k);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < model.k; ++j) model.basis(i, j) = svd.v(i, j);
  model.sigma.assign(svd.sigma.begin(), svd.sigma.begin() + static_cast<std::ptrdiff_t>(model.k));

  // Training data was already centered above, so project without a center.
  Matrix projection(x.rows(), model.k);
  std::vector<double> residual(x.rows());
  kernels::project_residual(x, model.basis, {}, projection, residual);
  model.within_inverse_cov = spd_inverse(covariance(projection), 0.0);
  return model;
}

EmbeddingDistances score_batch(const ModelledEmbedding& model, const Matrix& phi) {
  check_width(model, phi.cols());
  require_finite(phi, "observations");
  EmbeddingDistances out{std::vector<double>(phi.rows()), std::vector<double>(phi.rows())};
  Matrix projection(phi.rows(), model.k);
  kernels::project_residual(phi, model.basis, center_span(model), projection, out.dime);
  kernels::quadratic_norms(projection, model.within_inverse_cov.matrix, {}, out.within);
  return out;
}

std::vector<double> dime_score(const ModelledEmbedding& model, const Matrix& phi) {
  check_width(model, phi.cols());
  require_finite(phi, "observations");
  std::vector<double> out(phi.rows());
  Matrix projection(phi.rows(), model.k);
  kernels::project_residual(phi, model.basis, center_span(model), projection, out);
  return out;
}

double dime_score(const ModelledEmbedding& model, std::span<const double> phi) {
  return dime_score(model, Matrix::row_vector(phi)).front();
}

std::vector<double> d_within(const ModelledEmbedding& model, const Matrix& phi) {
  return score_batch(model, phi).within;
}

double d_within(const ModelledEmbedding& model, std::span<const double> phi) {
  return d_within(model, Matrix::row_vector(phi)).front();
}

}  // namespace dime

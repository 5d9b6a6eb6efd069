#include "dime_scope/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "dime_scope/error.hpp"
#include "dime_scope/random.hpp"

namespace dime {

namespace {

struct Geometry {
  Matrix basis;                 // p×k
  std::vector<double> off_plane;
  Matrix means;                 // (n_classes + 1)×k, last row excluded
};

Geometry make_geometry(const SyntheticSpec& spec) {
  const std::size_t p = spec.p;
  const std::size_t k = spec.k_signal;
  Rng rng(spec.seed);
  Matrix g(p, k + 1);
  for (double& v : g.data()) v = rng.normal();
  for (std::size_t j = 0; j <= k; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < j; ++c) {
        double proj = 0.0;
        for (std::size_t i = 0; i < p; ++i) proj += g(i, c) * g(i, j);
        for (std::size_t i = 0; i < p; ++i) g(i, j) -= proj * g(i, c);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < p; ++i) norm += g(i, j) * g(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < p; ++i) g(i, j) /= norm;
  }
  Geometry geo{Matrix(p, k), std::vector<double>(p), Matrix(spec.n_classes + 1, k)};
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < k; ++j) geo.basis(i, j) = g(i, j);
    geo.off_plane[i] = g(i, k);
  }
  for (std::size_t c = 0; c <= spec.n_classes; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      const double draw = rng.normal();
      geo.means(c, j) = (spec.n_classes == 1 && c == 0) ? 0.0 : spec.class_separation * draw;
    }
  }
  return geo;
}

// Rows x = (μ_c + z)·Bᵀ + ε. `fixed_component` overrides the uniform
// component draw (used for the excluded component).
Matrix sample_rows(const SyntheticSpec& spec, const Geometry& geo, std::size_t n, Rng& rng,
                   std::vector<int>* labels, std::optional<std::size_t> fixed_component = std::nullopt) {
  const std::size_t p = spec.p;
  const std::size_t k = spec.k_signal;
  Matrix out(n, p);
  std::vector<double> z(k);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = fixed_component ? *fixed_component : static_cast<std::size_t>(rng.below(spec.n_classes));
    if (labels) labels->push_back(static_cast<int>(c));
    for (std::size_t j = 0; j < k; ++j) z[j] = geo.means(c, j) + rng.normal();
    auto row = out.row(r);
    for (std::size_t i = 0; i < p; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += z[j] * geo.basis(i, j);
      row[i] = s;
    }
    for (std::size_t i = 0; i < p; ++i) row[i] += spec.noise_sigma * rng.normal();
  }
  return out;
}

void validate(const SyntheticSpec& spec) {
  if (spec.k_signal == 0 || spec.k_signal >= spec.p) {
    throw ValidationError("synthetic spec: need 1 ≤ k_signal < p");
  }
  if (spec.n_train == 0 || spec.n_val == 0 || spec.n_test_in == 0 || spec.n_ood == 0) {
    throw ValidationError("synthetic spec: every count must be at least 1");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw ValidationError("synthetic spec: noise_sigma must be finite and nonnegative");
  }
  if (!std::isfinite(spec.shift_magnitude)) throw ValidationError("synthetic spec: shift_magnitude must be finite");
  if (spec.n_classes == 0) throw ValidationError("synthetic spec: n_classes must be at least 1");
  if (!(spec.class_separation >= 0.0)) throw ValidationError("synthetic spec: class_separation must be nonnegative");
}

}  // namespace

std::string_view to_string(OodKind kind) {
  switch (kind) {
    case OodKind::kResidualShift:
      return "residual_shift";
    case OodKind::kUniformNoise:
      return "uniform_noise";
    case OodKind::kRademacher:
      return "rademacher";
    case OodKind::kScaled:
      return "scaled";
    case OodKind::kClassExcluded:
      return "class_excluded";
  }
  return "unknown";
}

OodKind parse_ood_kind(std::string_view name) {
  for (auto kind : {OodKind::kResidualShift, OodKind::kUniformNoise, OodKind::kRademacher, OodKind::kScaled,
                    OodKind::kClassExcluded}) {
    if (name == to_string(kind)) return kind;
  }
  throw ValidationError("unknown ood kind '" + std::string(name) + "'");
}

SyntheticData generate(const SyntheticSpec& spec) {
  validate(spec);
  const Geometry geo = make_geometry(spec);
  SyntheticData data;
  data.basis = geo.basis;
  data.off_plane = geo.off_plane;
  {
    Rng rng(derive_seed(spec.seed, 1));
    data.train = sample_rows(spec, geo, spec.n_train, rng, &data.train_labels);
  }
  {
    Rng rng(derive_seed(spec.seed, 2));
    data.validation = sample_rows(spec, geo, spec.n_val, rng, nullptr);
  }
  {
    Rng rng(derive_seed(spec.seed, 3));
    data.test_in = sample_rows(spec, geo, spec.n_test_in, rng, nullptr);
  }

  Rng rng(derive_seed(spec.seed, 100 + static_cast<std::uint64_t>(spec.ood_kind)));
  switch (spec.ood_kind) {
    case OodKind::kResidualShift: {
      data.ood = sample_rows(spec, geo, spec.n_ood, rng, nullptr);
      for (std::size_t r = 0; r < data.ood.rows(); ++r) {
        auto row = data.ood.row(r);
        for (std::size_t i = 0; i < spec.p; ++i) row[i] += spec.shift_magnitude * geo.off_plane[i];
      }
      break;
    }
    case OodKind::kScaled: {
      data.ood = sample_rows(spec, geo, spec.n_ood, rng, nullptr);
      for (double& v : data.ood.data()) v *= spec.shift_magnitude;
      break;
    }
    case OodKind::kUniformNoise: {
      const auto [lo, hi] = std::minmax_element(data.train.data().begin(), data.train.data().end());
      const double low = *lo;
      const double width = *hi - *lo;
      data.ood = Matrix(spec.n_ood, spec.p);
      for (double& v : data.ood.data()) v = low + width * rng.uniform();
      break;
    }
    case OodKind::kRademacher: {
      const double scale = std::sqrt(frobenius_norm_sq(data.train) / static_cast<double>(data.train.size()));
      data.ood = Matrix(spec.n_ood, spec.p);
      for (double& v : data.ood.data()) v = (rng.next_u64() >> 63) ? scale : -scale;
      break;
    }
    case OodKind::kClassExcluded: {
      data.ood = sample_rows(spec, geo, spec.n_ood, rng, nullptr, spec.n_classes);
      break;
    }
  }
  return data;
}

}  // namespace dime

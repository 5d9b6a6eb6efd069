#pragma once

// Seeded synthetic embeddings for desk-scale experiments.
//
// In-distribution rows are x = z·Bᵀ + ε. B is a random orthonormal p×k basis,
// z = μ_c + N(0, I_k) for a component c drawn uniformly from n_classes, and
// ε ~ N(0, noise_sigma² I_p). With a single class μ_0 = 0; otherwise each
// μ_c = class_separation · N(0, I_k).
//
// Draw order, all through dime::Rng:
//   stream seed:      p×(k+1) standard normals, row-major, orthonormalized by
//                     modified Gram-Schmidt into B (first k columns) and the
//                     off-plane unit vector u (last column); then k normals
//                     per component mean, for n_classes + 1 components (the
//                     last is the excluded component).
//   derive_seed(seed, 1/2/3): train / validation / test_in rows.
//   derive_seed(seed, 100 + kind): OOD rows for that kind.
// Per in-distribution row: component index, then k latent normals, then p
// noise normals.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dime_scope/matrix.hpp"

namespace dime {

enum class OodKind { kResidualShift, kUniformNoise, kRademacher, kScaled, kClassExcluded };

std::string_view to_string(OodKind kind);
OodKind parse_ood_kind(std::string_view name);

struct SyntheticSpec {
  std::size_t n_train = 1000;
  std::size_t n_val = 200;
  std::size_t n_test_in = 200;
  std::size_t n_ood = 200;
  std::size_t p = 10;
  std::size_t k_signal = 3;
  double noise_sigma = 0.01;
  OodKind ood_kind = OodKind::kResidualShift;
  // residual_shift: absolute offset along u. scaled: multiplier.
  // Ignored by the other kinds.
  double shift_magnitude = 0.05;
  std::size_t n_classes = 1;
  double class_separation = 3.0;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Matrix train;
  Matrix validation;
  Matrix test_in;
  Matrix ood;
  std::vector<int> train_labels;
  Matrix basis;                   // B, p×k
  std::vector<double> off_plane;  // u, unit length, orthogonal to B
};

// OOD construction per kind:
//   residual_shift  fresh in-distribution rows + shift_magnitude·u
//   uniform_noise   i.i.d. uniform over [min, max] of the training entries
//   rademacher      i.i.d. ±s, s = root-mean-square of the training entries
//   scaled          fresh in-distribution rows × shift_magnitude
//   class_excluded  rows from the excluded component (never in train)
SyntheticData generate(const SyntheticSpec& spec);

}  // namespace dime

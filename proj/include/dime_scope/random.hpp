#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace dime {

// Portable seeded generator. Bits come from std::mt19937_64, whose output
// sequence is fixed by the C++ standard. The variate transforms below are
// written out here rather than taken from <random> distributions, whose
// algorithms differ between standard libraries:
//   uniform()  = (bits >> 11) · 2⁻⁵³                     in [0, 1)
//   normal()   = Box–Muller on u1 = 1 − uniform(), u2 = uniform():
//                √(−2 ln u1)·cos(2π u2), then the paired sin value
//   below(m)   = rejection sampling on the top bits
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

// SplitMix64 mix of (seed, stream); gives independent per-cell seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dime

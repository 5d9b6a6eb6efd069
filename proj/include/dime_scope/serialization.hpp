#pragma once

// Model and scorer files.
//
// Layout (integers little-endian):
//   bytes 0-3   magic "DSCM"
//   bytes 4-7   u32 container version (= 1)
//   bytes 8-15  u64 metadata length L
//   next L      UTF-8 JSON metadata; "tensors" lists the names of the blocks
//               that follow, in order
//   then        one matrix-io binary block per listed tensor
//
// Tensors are stored bit-exactly, so a reloaded scorer reproduces the
// original scores bit for bit.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "dime_scope/calibration.hpp"

namespace dime {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// A fitted model, optionally with its validation ECDF. Uncalibrated files
// yield distances but no probabilities.
struct StoredScorer {
  DistanceModel model;
  Metric metric = Metric::kDime;
  std::optional<Ecdf> ecdf;

  static StoredScorer from(const CalibratedScorer& scorer) { return {scorer.model, scorer.metric, scorer.ecdf}; }
  std::optional<CalibratedScorer> calibrated() const;
};

void write_scorer(const StoredScorer& scorer, std::ostream& out);
StoredScorer read_scorer(std::istream& in);

void save_scorer(const StoredScorer& scorer, const std::filesystem::path& path);
StoredScorer load_scorer(const std::filesystem::path& path);

}  // namespace dime

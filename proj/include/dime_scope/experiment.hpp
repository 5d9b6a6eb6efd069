#pragma once

// Evaluation harness: fit every configured metric on training embeddings,
// score in-distribution test rows against each OOD set, and report PR-AUC
// with OOD as the positive class.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dime_scope/dime.hpp"
#include "dime_scope/synthetic.hpp"

namespace dime {

// Anomaly orientation used for ranking:
//   dime, d_within, mahalanobis   distance
//   class_mahalanobis             min_k D_M (the negated class score)
//   softmax                       1 − confidence
//   mc_entropy                    predictive entropy
enum class EvalMetric { kDime, kDWithin, kMahalanobis, kClassMahalanobis, kSoftmax, kMcEntropy };

std::string_view to_string(EvalMetric metric);
EvalMetric parse_eval_metric(std::string_view name);
bool uses_rank_spec(EvalMetric metric);

struct SyntheticSource {
  SyntheticSpec spec;  // ood_kind is overridden per entry of ood_kinds
  std::vector<OodKind> ood_kinds;
};

// Embedding files exported from one layer of a model.
struct DepthFiles {
  std::string name;
  std::filesystem::path train;
  std::filesystem::path validation;
  std::filesystem::path test_in;
  std::optional<std::filesystem::path> train_labels;
  std::map<std::string, std::filesystem::path> ood;
  // Classifier outputs for the baselines, keyed like `ood`.
  std::optional<std::filesystem::path> test_in_logits;
  std::map<std::string, std::filesystem::path> ood_logits;
  std::optional<std::filesystem::path> test_in_mc;
  std::map<std::string, std::filesystem::path> ood_mc;
};

struct FileSource {
  std::vector<DepthFiles> depths;
  bool csv_header = false;
  std::size_t mc_samples = 0;
  bool mc_logits = false;
};

struct ExperimentConfig {
  std::vector<EvalMetric> metrics;
  std::vector<RankSpec> rank_specs{ExplainedVariance{0.99}};
  bool center = false;
  double ridge = 0.0;
  // Synthetic sources are regenerated once per seed. File sources are not
  // random and accept a single seed, which is only echoed in the report.
  std::vector<std::uint64_t> seeds{0};
  std::variant<SyntheticSource, FileSource> source;
};

// Relative paths in the file are resolved against the config's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(std::string_view toml_text, const std::filesystem::path& base_dir = {});

struct ReportRow {
  std::string metric;     // "<metric>" or "<metric>@<depth>" with several depths
  std::string ood_kind;
  std::string rank_spec;  // "r=…"/"k=…" for hyperplane metrics, "-" otherwise
  double pr_auc = 0.0;
  std::size_t n_in = 0;
  std::size_t n_ood = 0;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  // First row matching metric, ood kind and rank spec, if any.
  const ReportRow* find(std::string_view metric, std::string_view ood_kind, std::string_view rank_spec = "-") const;
  // As find, restricted to one seed.
  const ReportRow* find(std::string_view metric, std::string_view ood_kind, std::string_view rank_spec,
                        std::uint64_t seed) const;
};

EvalReport run_experiment(const ExperimentConfig& config);

// Header "metric,ood_kind,rank_spec,pr_auc,n_in,n_ood,seed", one line per row.
void write_report_csv(const EvalReport& report, std::ostream& out);

}  // namespace dime

#include "dime_scope/experiment.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "dime_scope/baselines.hpp"
#include "dime_scope/calibration.hpp"
#include "dime_scope/error.hpp"
#include "dime_scope/matrix_io.hpp"
#include "dime_scope/pr_auc.hpp"

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

namespace dime {

namespace fs = std::filesystem;

namespace {

// One feature depth's worth of loaded or generated data.
struct Dataset {
  std::string depth;  // empty for a single-depth run
  Matrix train;
  std::optional<std::vector<int>> train_labels;
  Matrix validation;
  Matrix test_in;
  std::vector<std::pair<std::string, Matrix>> ood;
  std::optional<Matrix> test_in_logits;
  std::map<std::string, Matrix> ood_logits;
  std::optional<Matrix> test_in_mc;
  std::map<std::string, Matrix> ood_mc;
};

std::vector<double> anomaly_from_confidence(std::vector<double> confidence) {
  for (double& c : confidence) c = 1.0 - c;
  return confidence;
}

void check_widths(const Dataset& d) {
  const std::size_t p = d.train.cols();
  const auto check = [&](const Matrix& m, const std::string& what) {
    if (m.cols() != p) {
      throw ValidationError("dimension mismatch: " + what + " has p=" + std::to_string(m.cols()) +
                            ", training data has p=" + std::to_string(p));
    }
  };
  check(d.validation, "validation");
  check(d.test_in, "test_in");
  for (const auto& [name, m] : d.ood) check(m, "ood set '" + name + "'");
  if (d.train_labels && d.train_labels->size() != d.train.rows()) {
    throw ValidationError("train_labels has " + std::to_string(d.train_labels->size()) + " entries for " +
                          std::to_string(d.train.rows()) + " training rows");
  }
}

void evaluate(const Dataset& data, const ExperimentConfig& config, std::uint64_t seed, std::size_t mc_samples,
              bool mc_logits, EvalReport& report) {
  check_widths(data);
  const auto label = [&](EvalMetric m) {
    std::string s(to_string(m));
    return data.depth.empty() ? s : s + "@" + data.depth;
  };
  const auto emit = [&](EvalMetric m, const std::string& rank, const std::string& ood_name,
                        std::span<const double> in_scores, std::span<const double> ood_scores) {
    report.rows.push_back(ReportRow{label(m), ood_name, rank, pr_auc(make_scored_set(in_scores, ood_scores)),
                                    in_scores.size(), ood_scores.size(), seed});
  };

  std::map<std::string, ModelledEmbedding> hyperplanes;
  for (const EvalMetric metric : config.metrics) {
    switch (metric) {
      case EvalMetric::kDime:
      case EvalMetric::kDWithin: {
        const Metric m = metric == EvalMetric::kDime ? Metric::kDime : Metric::kDWithin;
        for (const auto& spec : config.rank_specs) {
          const std::string key = to_string(spec);
          auto it = hyperplanes.find(key);
          if (it == hyperplanes.end()) it = hyperplanes.emplace(key, fit(data.train, spec, config.center)).first;
          const DistanceModel model = it->second;
          const auto in_scores = distances(model, m, data.test_in);
          for (const auto& [name, ood] : data.ood) emit(metric, key, name, in_scores, distances(model, m, ood));
        }
        break;
      }
      case EvalMetric::kMahalanobis: {
        const DistanceModel model = fit_simple(data.train, config.ridge);
        const auto in_scores = distances(model, Metric::kMahalanobis, data.test_in);
        for (const auto& [name, ood] : data.ood) {
          emit(metric, "-", name, in_scores, distances(model, Metric::kMahalanobis, ood));
        }
        break;
      }
      case EvalMetric::kClassMahalanobis: {
        if (!data.train_labels) throw ValidationError("class_mahalanobis needs training labels");
        const DistanceModel model = fit_class(data.train, *data.train_labels, config.ridge);
        const auto in_scores = distances(model, Metric::kClassMahalanobis, data.test_in);
        for (const auto& [name, ood] : data.ood) {
          emit(metric, "-", name, in_scores, distances(model, Metric::kClassMahalanobis, ood));
        }
        break;
      }
      case EvalMetric::kSoftmax: {
        if (!data.test_in_logits) throw ValidationError("softmax needs test_in_logits");
        const auto in_scores = anomaly_from_confidence(softmax_confidence(*data.test_in_logits));
        for (const auto& [name, ood] : data.ood) {
          const auto it = data.ood_logits.find(name);
          if (it == data.ood_logits.end()) throw ValidationError("softmax needs ood_logits for '" + name + "'");
          emit(metric, "-", name, in_scores, anomaly_from_confidence(softmax_confidence(it->second)));
        }
        break;
      }
      case EvalMetric::kMcEntropy: {
        if (!data.test_in_mc) throw ValidationError("mc_entropy needs test_in_mc");
        const auto in_scores = predictive_entropy(make_sample_stack(*data.test_in_mc, mc_samples, mc_logits));
        for (const auto& [name, ood] : data.ood) {
          const auto it = data.ood_mc.find(name);
          if (it == data.ood_mc.end()) throw ValidationError("mc_entropy needs ood_mc for '" + name + "'");
          emit(metric, "-", name, in_scores, predictive_entropy(make_sample_stack(it->second, mc_samples, mc_logits)));
        }
        break;
      }
    }
  }
}

Dataset synthetic_dataset(const SyntheticSource& source, std::uint64_t seed) {
  if (source.ood_kinds.empty()) throw ValidationError("synthetic source lists no ood_kinds");
  Dataset data;
  for (std::size_t i = 0; i < source.ood_kinds.size(); ++i) {
    SyntheticSpec spec = source.spec;
    spec.seed = seed;
    spec.ood_kind = source.ood_kinds[i];
    SyntheticData generated = generate(spec);
    if (i == 0) {
      data.train = std::move(generated.train);
      data.train_labels = std::move(generated.train_labels);
      data.validation = std::move(generated.validation);
      data.test_in = std::move(generated.test_in);
    }
    data.ood.emplace_back(std::string(to_string(spec.ood_kind)), std::move(generated.ood));
  }
  return data;
}

Dataset file_dataset(const DepthFiles& files, const FileSource& source) {
  const CsvOptions csv{source.csv_header};
  const auto load = [&](const fs::path& p) { return load_matrix(p, csv); };
  Dataset data;
  data.depth = source.depths.size() > 1 ? files.name : std::string();
  data.train = load(files.train);
  data.validation = load(files.validation);
  data.test_in = load(files.test_in);
  if (files.train_labels) data.train_labels = load_labels(*files.train_labels);
  if (files.ood.empty()) throw ValidationError("depth '" + files.name + "' lists no ood sets");
  for (const auto& [name, path] : files.ood) data.ood.emplace_back(name, load(path));
  if (files.test_in_logits) data.test_in_logits = load(*files.test_in_logits);
  for (const auto& [name, path] : files.ood_logits) data.ood_logits.emplace(name, load(path));
  if (files.test_in_mc) data.test_in_mc = load(*files.test_in_mc);
  for (const auto& [name, path] : files.ood_mc) data.ood_mc.emplace(name, load(path));
  return data;
}

// ---- TOML ----------------------------------------------------------------

void reject_unknown_keys(const toml::table& table, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, node] : table) {
    if (!allowed.contains(std::string(key.str()))) {
      throw ValidationError("config: unknown key '" + std::string(key.str()) + "' in " + where);
    }
  }
}

template <typename T>
std::optional<T> get(const toml::table& table, std::string_view key) {
  const toml::node* node = table.get(key);
  if (!node) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
    if (auto v = node->value<std::int64_t>(); v && *v >= 0) return static_cast<T>(*v);
  } else {
    if (auto v = node->value<T>()) return *v;
  }
  throw ValidationError("config: key '" + std::string(key) + "' has the wrong type");
}

std::vector<std::string> get_strings(const toml::table& table, std::string_view key) {
  std::vector<std::string> out;
  const toml::node* node = table.get(key);
  if (!node) return out;
  const toml::array* arr = node->as_array();
  if (!arr) throw ValidationError("config: key '" + std::string(key) + "' must be an array of strings");
  for (const auto& item : *arr) {
    auto s = item.value<std::string>();
    if (!s) throw ValidationError("config: key '" + std::string(key) + "' must be an array of strings");
    out.push_back(*s);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::map<std::string, fs::path> path_map(const toml::table& depth, std::string_view key, const fs::path& base) {
  std::map<std::string, fs::path> out;
  const toml::node* node = depth.get(key);
  if (!node) return out;
  const toml::table* t = node->as_table();
  if (!t) throw ValidationError("config: '" + std::string(key) + "' must be a table of name = path");
  for (const auto& [name, value] : *t) {
    auto s = value.value<std::string>();
    if (!s) throw ValidationError("config: '" + std::string(key) + "." + std::string(name.str()) + "' must be a path");
    out.emplace(std::string(name.str()), resolve(base, *s));
  }
  return out;
}

std::optional<fs::path> optional_path(const toml::table& t, std::string_view key, const fs::path& base) {
  if (auto s = get<std::string>(t, key)) return resolve(base, *s);
  return std::nullopt;
}

fs::path required_path(const toml::table& t, std::string_view key, const fs::path& base, const std::string& where) {
  auto p = optional_path(t, key, base);
  if (!p) throw ValidationError("config: " + where + " is missing '" + std::string(key) + "'");
  return *p;
}

SyntheticSource parse_synthetic(const toml::table& t) {
  reject_unknown_keys(t,
                      {"n_train", "n_val", "n_test_in", "n_ood", "p", "k_signal", "noise_sigma", "shift_magnitude",
                       "n_classes", "class_separation", "ood_kinds"},
                      "[synthetic]");
  SyntheticSource source;
  auto& s = source.spec;
  s.n_train = get<std::size_t>(t, "n_train").value_or(s.n_train);
  s.n_val = get<std::size_t>(t, "n_val").value_or(s.n_val);
  s.n_test_in = get<std::size_t>(t, "n_test_in").value_or(s.n_test_in);
  s.n_ood = get<std::size_t>(t, "n_ood").value_or(s.n_ood);
  s.p = get<std::size_t>(t, "p").value_or(s.p);
  s.k_signal = get<std::size_t>(t, "k_signal").value_or(s.k_signal);
  s.noise_sigma = get<double>(t, "noise_sigma").value_or(s.noise_sigma);
  s.shift_magnitude = get<double>(t, "shift_magnitude").value_or(s.shift_magnitude);
  s.n_classes = get<std::size_t>(t, "n_classes").value_or(s.n_classes);
  s.class_separation = get<double>(t, "class_separation").value_or(s.class_separation);
  for (const auto& k : get_strings(t, "ood_kinds")) source.ood_kinds.push_back(parse_ood_kind(k));
  if (source.ood_kinds.empty()) source.ood_kinds.push_back(OodKind::kResidualShift);
  return source;
}

FileSource parse_files(const toml::table& t, const fs::path& base) {
  reject_unknown_keys(t, {"header", "mc_samples", "mc_logits", "depth"}, "[files]");
  FileSource source;
  source.csv_header = get<bool>(t, "header").value_or(false);
  source.mc_samples = get<std::size_t>(t, "mc_samples").value_or(0);
  source.mc_logits = get<bool>(t, "mc_logits").value_or(false);
  const toml::array* depths = t.get("depth") ? t.get("depth")->as_array() : nullptr;
  if (!depths || depths->empty()) throw ValidationError("config: [files] needs at least one [[files.depth]] entry");
  std::set<std::string> names;
  for (const auto& node : *depths) {
    const toml::table* d = node.as_table();
    if (!d) throw ValidationError("config: [[files.depth]] entries must be tables");
    reject_unknown_keys(*d,
                        {"name", "train", "validation", "test_in", "train_labels", "ood", "test_in_logits",
                         "ood_logits", "test_in_mc", "ood_mc"},
                        "[[files.depth]]");
    DepthFiles files;
    files.name = get<std::string>(*d, "name").value_or("depth" + std::to_string(source.depths.size()));
    if (!names.insert(files.name).second) throw ValidationError("config: duplicate depth name '" + files.name + "'");
    const std::string where = "depth '" + files.name + "'";
    files.train = required_path(*d, "train", base, where);
    files.validation = required_path(*d, "validation", base, where);
    files.test_in = required_path(*d, "test_in", base, where);
    files.train_labels = optional_path(*d, "train_labels", base);
    files.ood = path_map(*d, "ood", base);
    files.test_in_logits = optional_path(*d, "test_in_logits", base);
    files.ood_logits = path_map(*d, "ood_logits", base);
    files.test_in_mc = optional_path(*d, "test_in_mc", base);
    files.ood_mc = path_map(*d, "ood_mc", base);
    source.depths.push_back(std::move(files));
  }
  return source;
}

}  // namespace

std::string_view to_string(EvalMetric metric) {
  switch (metric) {
    case EvalMetric::kDime:
      return "dime";
    case EvalMetric::kDWithin:
      return "d_within";
    case EvalMetric::kMahalanobis:
      return "mahalanobis";
    case EvalMetric::kClassMahalanobis:
      return "class_mahalanobis";
    case EvalMetric::kSoftmax:
      return "softmax";
    case EvalMetric::kMcEntropy:
      return "mc_entropy";
  }
  return "unknown";
}

EvalMetric parse_eval_metric(std::string_view name) {
  for (auto m : {EvalMetric::kDime, EvalMetric::kDWithin, EvalMetric::kMahalanobis, EvalMetric::kClassMahalanobis,
                 EvalMetric::kSoftmax, EvalMetric::kMcEntropy}) {
    if (name == to_string(m)) return m;
  }
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

bool uses_rank_spec(EvalMetric metric) { return metric == EvalMetric::kDime || metric == EvalMetric::kDWithin; }

ExperimentConfig parse_experiment_config(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw ValidationError(msg.str());
  }
  reject_unknown_keys(root, {"seed", "seeds", "metrics", "rank_specs", "center", "ridge", "synthetic", "files"}, "config");

  ExperimentConfig config;
  if (root.get("seed") && root.get("seeds")) throw ValidationError("config: give either seed or seeds, not both");
  if (auto seed = get<std::uint64_t>(root, "seed")) config.seeds = {*seed};
  if (const toml::node* node = root.get("seeds")) {
    const toml::array* arr = node->as_array();
    if (!arr || arr->empty()) throw ValidationError("config: seeds must be a nonempty array of integers");
    config.seeds.clear();
    for (const auto& item : *arr) {
      auto v = item.value<std::int64_t>();
      if (!v || *v < 0) throw ValidationError("config: seeds must be nonnegative integers");
      config.seeds.push_back(static_cast<std::uint64_t>(*v));
    }
  }
  for (const auto& m : get_strings(root, "metrics")) config.metrics.push_back(parse_eval_metric(m));
  if (root.get("rank_specs")) {
    config.rank_specs.clear();
    for (const auto& r : get_strings(root, "rank_specs")) config.rank_specs.push_back(parse_rank_spec(r));
  }
  config.center = get<bool>(root, "center").value_or(false);
  config.ridge = get<double>(root, "ridge").value_or(0.0);

  const toml::table* synthetic = root.get("synthetic") ? root.get("synthetic")->as_table() : nullptr;
  const toml::table* files = root.get("files") ? root.get("files")->as_table() : nullptr;
  if ((synthetic != nullptr) == (files != nullptr)) {
    throw ValidationError("config: declare exactly one data source, [synthetic] or [files]");
  }
  if (synthetic) {
    config.source = parse_synthetic(*synthetic);
  } else {
    config.source = parse_files(*files, base_dir);
  }
  return config;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str(), path.parent_path());
}

const ReportRow* EvalReport::find(std::string_view metric, std::string_view ood_kind, std::string_view rank_spec) const {
  for (const auto& row : rows) {
    if (row.metric == metric && row.ood_kind == ood_kind && row.rank_spec == rank_spec) return &row;
  }
  return nullptr;
}

const ReportRow* EvalReport::find(std::string_view metric, std::string_view ood_kind, std::string_view rank_spec,
                                  std::uint64_t seed) const {
  for (const auto& row : rows) {
    if (row.metric == metric && row.ood_kind == ood_kind && row.rank_spec == rank_spec && row.seed == seed) return &row;
  }
  return nullptr;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  if (config.metrics.empty()) throw ValidationError("nothing to evaluate: metric list is empty");
  for (const auto m : config.metrics) {
    if (uses_rank_spec(m) && config.rank_specs.empty()) throw ValidationError("rank_specs is empty");
  }
  if (!(config.ridge >= 0.0)) throw ValidationError("ridge must be nonnegative");
  if (config.seeds.empty()) throw ValidationError("seeds is empty");

  EvalReport report;
  if (const auto* synthetic = std::get_if<SyntheticSource>(&config.source)) {
    for (const auto seed : config.seeds) evaluate(synthetic_dataset(*synthetic, seed), config, seed, 0, false, report);
  } else {
    if (config.seeds.size() != 1) throw ValidationError("file sources take a single seed");
    const auto& files = std::get<FileSource>(config.source);
    for (const auto& depth : files.depths) {
      evaluate(file_dataset(depth, files), config, config.seeds.front(), files.mc_samples, files.mc_logits, report);
    }
  }
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "metric,ood_kind,rank_spec,pr_auc,n_in,n_ood,seed\n";
  for (const auto& row : report.rows) {
    out << row.metric << ',' << row.ood_kind << ',' << row.rank_spec << ',' << format_double(row.pr_auc) << ','
        << row.n_in << ',' << row.n_ood << ',' << row.seed << '\n';
  }
}

}  // namespace dime

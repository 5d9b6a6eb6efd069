#include "dime_scope/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "dime_scope/baselines.hpp"
#include "dime_scope/calibration.hpp"
#include "dime_scope/error.hpp"
#include "dime_scope/experiment.hpp"
#include "dime_scope/matrix_io.hpp"
#include "dime_scope/serialization.hpp"

namespace dime {

namespace {

struct ConvertArgs {
  std::string in, out, format = "binary", pool, axes, shape;
  bool header = false;
};

struct FitArgs {
  std::string train, out;
  std::optional<double> r;
  std::optional<std::size_t> k;
  bool center = false;
  bool header = false;
};

struct FitMahaArgs {
  std::string train, labels, out;
  double ridge = 0.0;
  bool header = false;
};

struct CalibrateArgs {
  std::string model, val, metric, out;
  bool header = false;
};

struct ScoreArgs {
  std::string scorer, baseline, in, out;
  double alpha = 0.01;
  std::size_t samples = 0;
  bool logits = false;
  bool header = false;
};

struct EvalArgs {
  std::string config, out;
};

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || v == 0) throw ValidationError("--shape: bad dimension '" + part + "'");
    dims.push_back(static_cast<std::size_t>(v));
  }
  if (dims.empty()) throw ValidationError("--shape: no dimensions given");
  return dims;
}

void run_convert(const ConvertArgs& a) {
  const MatrixFormat format = parse_matrix_format(a.format);
  Matrix m = load_matrix(a.in, CsvOptions{a.header});
  if (!a.pool.empty() || !a.axes.empty() || !a.shape.empty()) {
    if (a.pool.empty() || a.axes.empty() || a.shape.empty()) {
      throw ValidationError("pooling needs --pool, --axes and --shape together");
    }
    EmbeddingTensor tensor{parse_shape(a.shape), parse_axis_roles(a.axes), {m.data().begin(), m.data().end()}};
    m = pool_features(tensor, parse_pool_mode(a.pool));
  }
  store_matrix(m, a.out, format);
}

void run_fit(const FitArgs& a) {
  if (a.r && a.k) throw ValidationError("conflicting rank specs: --r and --k are mutually exclusive");
  RankSpec spec = ExplainedVariance{0.99};
  if (a.r) {
    if (!(*a.r > 0.0 && *a.r <= 1.0)) throw ValidationError("--r must lie in (0, 1]");
    spec = ExplainedVariance{*a.r};
  } else if (a.k) {
    if (*a.k == 0) throw ValidationError("--k must be at least 1");
    spec = ExplicitRank{*a.k};
  }
  const Matrix train = load_matrix(a.train, CsvOptions{a.header});
  save_scorer(StoredScorer{fit(train, spec, a.center), Metric::kDime, std::nullopt}, a.out);
}

void run_fit_maha(const FitMahaArgs& a) {
  if (!(a.ridge >= 0.0) || !std::isfinite(a.ridge)) throw ValidationError("--ridge must be finite and nonnegative");
  const Matrix train = load_matrix(a.train, CsvOptions{a.header});
  StoredScorer scorer{MahalanobisModel{}, Metric::kMahalanobis, std::nullopt};
  if (a.labels.empty()) {
    scorer.model = fit_simple(train, a.ridge);
  } else {
    const std::vector<int> labels = load_labels(a.labels);
    scorer.model = fit_class(train, labels, a.ridge);
    scorer.metric = Metric::kClassMahalanobis;
  }
  save_scorer(scorer, a.out);
}

void run_calibrate(const CalibrateArgs& a) {
  StoredScorer stored = load_scorer(a.model);
  const Metric metric = a.metric.empty() ? stored.metric : parse_metric(a.metric);
  const Matrix validation = load_matrix(a.val, CsvOptions{a.header});
  save_scorer(StoredScorer::from(calibrate(std::move(stored.model), validation, metric)), a.out);
}

std::string flag(bool b) { return b ? "1" : "0"; }

void run_score(const ScoreArgs& a) {
  if (a.scorer.empty() == a.baseline.empty()) throw ValidationError("score needs exactly one of --scorer or --baseline");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
  const Matrix phi = load_matrix(a.in, CsvOptions{a.header});

  if (!a.scorer.empty()) {
    const StoredScorer stored = load_scorer(a.scorer);
    const std::vector<double> d = distances(stored.model, stored.metric, phi);
    const auto calibrated = stored.calibrated();
    write_atomically(a.out, [&](std::ostream& out) {
      out << "row_index,distance,probability,is_ood\n";
      for (std::size_t i = 0; i < d.size(); ++i) {
        out << i << ',' << format_double(d[i]) << ',';
        if (calibrated) {
          const double p = probability_from_distance(*calibrated, d[i]);
          out << format_double(p) << ',' << flag(is_ood_probability(p, a.alpha)) << '\n';
        } else {
          out << "NA,NA\n";
        }
      }
    });
    return;
  }

  std::vector<double> value;
  std::vector<double> anomaly;
  if (a.baseline == "softmax") {
    if (a.samples != 0 || a.logits) throw ValidationError("--samples and --logits apply to mc-entropy only");
    value = softmax_confidence(phi);
    anomaly.reserve(value.size());
    for (double c : value) anomaly.push_back(1.0 - c);
  } else if (a.baseline == "mc-entropy") {
    if (a.samples < 2) throw ValidationError("mc-entropy needs --samples M with M >= 2");
    value = predictive_entropy(make_sample_stack(phi, a.samples, a.logits));
    anomaly = value;
  } else {
    throw ValidationError("unknown baseline '" + a.baseline + "' (expected softmax or mc-entropy)");
  }
  write_atomically(a.out, [&](std::ostream& out) {
    out << "row_index,value,anomaly_score\n";
    for (std::size_t i = 0; i < value.size(); ++i) {
      out << i << ',' << format_double(value[i]) << ',' << format_double(anomaly[i]) << '\n';
    }
  });
}

void run_eval(const EvalArgs& a) {
  const EvalReport report = run_experiment(load_experiment_config(a.config));
  write_atomically(a.out, [&](std::ostream& out) { write_report_csv(report, out); });
}

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-of-distribution scoring with embedding hyperplanes", "dime-scope"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert between matrix formats, optionally pooling a layer tensor");
  c->add_option("--in", convert.in, "Input matrix (CSV or binary)")->required();
  c->add_option("--out", convert.out, "Output path")->required();
  c->add_option("--format", convert.format, "Output format: csv or binary")->capture_default_str();
  c->add_flag("--header", convert.header, "Skip the first line of CSV input");
  c->add_option("--pool", convert.pool, "Pool mode: mean or max");
  c->add_option("--axes", convert.axes, "Comma-separated axis roles: observation,channel,spatial,temporal");
  c->add_option("--shape", convert.shape, "Comma-separated tensor dimensions");

  FitArgs fit_args;
  auto* f = app.add_subcommand("fit", "Fit the modelled embedding on training rows");
  f->add_option("--train", fit_args.train, "Training embeddings")->required();
  f->add_option("--r", fit_args.r, "Cumulative explained-variance target in (0, 1] (default 0.99)");
  f->add_option("--k", fit_args.k, "Explicit rank");
  f->add_flag("--center", fit_args.center, "Subtract training column means before the decomposition");
  f->add_flag("--header", fit_args.header, "Skip the first line of CSV input");
  f->add_option("--out", fit_args.out, "Model file")->required();

  FitMahaArgs maha;
  auto* m = app.add_subcommand("fit-maha", "Fit a Mahalanobis model (class-pooled when labels are given)");
  m->add_option("--train", maha.train, "Training embeddings")->required();
  m->add_option("--labels", maha.labels, "Class labels, one integer per line");
  m->add_option("--ridge", maha.ridge, "Ridge added to covariance eigenvalues")->capture_default_str();
  m->add_flag("--header", maha.header, "Skip the first line of CSV input");
  m->add_option("--out", maha.out, "Model file")->required();

  CalibrateArgs cal;
  auto* k = app.add_subcommand("calibrate", "Attach a validation ECDF to a model");
  k->add_option("--model", cal.model, "Model file")->required();
  k->add_option("--val", cal.val, "Validation embeddings")->required();
  k->add_option("--metric", cal.metric, "dime, d_within, mahalanobis or class_mahalanobis");
  k->add_flag("--header", cal.header, "Skip the first line of CSV input");
  k->add_option("--out", cal.out, "Scorer file")->required();

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score observations with a scorer or a confidence baseline");
  s->add_option("--scorer", score.scorer, "Model or scorer file");
  s->add_option("--baseline", score.baseline, "softmax or mc-entropy");
  s->add_option("--in", score.in, "Observations, logits or stacked MC samples")->required();
  s->add_option("--out", score.out, "Scores CSV")->required();
  s->add_option("--alpha", score.alpha, "Flag rows whose probability is below alpha")->capture_default_str();
  s->add_option("--samples", score.samples, "Number of stacked MC samples");
  s->add_flag("--logits", score.logits, "MC samples are logits rather than probabilities");
  s->add_flag("--header", score.header, "Skip the first line of CSV input");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Run a PR-AUC evaluation described by a TOML config");
  e->add_option("--config", eval.config, "Experiment config")->required();
  e->add_option("--out", eval.out, "Report CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << one_line(ex.what()) << '\n';
    return 1;
  }

  try {
    if (c->parsed()) run_convert(convert);
    if (f->parsed()) run_fit(fit_args);
    if (m->parsed()) run_fit_maha(maha);
    if (k->parsed()) run_calibrate(cal);
    if (s->parsed()) run_score(score);
    if (e->parsed()) run_eval(eval);
  } catch (const IoError& ex) {
    err << "error: " << one_line(ex.what()) << '\n';
    return 2;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << one_line(ex.what()) << '\n';
    return 1;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace dime

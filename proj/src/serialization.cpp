#include "dime_scope/serialization.hpp"

#include <array>
#include <fstream>
#include <map>
#include <string>

#include "dime_scope/error.hpp"
#include "dime_scope/matrix_io.hpp"
#include "json.hpp"

namespace dime {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic = {'D', 'S', 'C', 'M'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ValidationError("model file: truncated header");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

Matrix as_row(std::span<const double> v) { return Matrix::row_vector(v); }

std::vector<double> flat(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

struct Tensors {
  std::vector<std::string> names;
  std::vector<Matrix> blocks;

  void add(std::string name, Matrix m) {
    names.push_back(std::move(name));
    blocks.push_back(std::move(m));
  }
};

class TensorMap {
 public:
  explicit TensorMap(std::map<std::string, Matrix> m) : m_(std::move(m)) {}

  const Matrix& at(const std::string& name) const {
    auto it = m_.find(name);
    if (it == m_.end()) throw ValidationError("model file: missing tensor '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return m_.contains(name); }

 private:
  std::map<std::string, Matrix> m_;
};

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ValidationError(std::string("model file: tensor '") + what + "' has shape " + std::to_string(m.rows()) +
                          "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

std::size_t get_count(const json& meta, const char* key) {
  if (!meta.contains(key) || !meta[key].is_number_unsigned()) {
    throw ValidationError(std::string("model file: metadata field '") + key + "' missing or invalid");
  }
  return meta[key].get<std::size_t>();
}

double get_real(const json& meta, const char* key) {
  if (!meta.contains(key) || !meta[key].is_number()) {
    throw ValidationError(std::string("model file: metadata field '") + key + "' missing or invalid");
  }
  return meta[key].get<double>();
}

void encode(const ModelledEmbedding& m, json& meta, Tensors& t) {
  meta["kind"] = "dime";
  meta["k"] = m.k;
  meta["r_requested"] = m.r_requested ? json(*m.r_requested) : json(nullptr);
  meta["center"] = m.center.has_value();
  meta["n_train"] = m.n_train;
  meta["spectrum_n"] = m.spectrum.n;
  meta["within_regularization"] = m.within_inverse_cov.regularization;
  meta["within_effective_rank"] = m.within_inverse_cov.effective_rank;
  t.add("basis", m.basis);
  t.add("sigma", as_row(m.sigma));
  t.add("variance_ratios", as_row(m.spectrum.ratios));
  t.add("within_inverse_cov", m.within_inverse_cov.matrix);
  if (m.center) t.add("center", as_row(*m.center));
}

void encode(const MahalanobisModel& m, json& meta, Tensors& t) {
  meta["kind"] = "mahalanobis";
  meta["regularization"] = m.inverse_cov.regularization;
  meta["effective_rank"] = m.inverse_cov.effective_rank;
  t.add("mean", as_row(m.mean));
  t.add("inverse_cov", m.inverse_cov.matrix);
}

void encode(const ClassMahalanobisModel& m, json& meta, Tensors& t) {
  meta["kind"] = "class_mahalanobis";
  meta["regularization"] = m.inverse_cov.regularization;
  meta["effective_rank"] = m.inverse_cov.effective_rank;
  meta["class_counts"] = m.class_counts;
  t.add("centroids", m.centroids);
  t.add("inverse_cov", m.inverse_cov.matrix);
}

ModelledEmbedding decode_dime(const json& meta, const TensorMap& t) {
  ModelledEmbedding m;
  m.k = get_count(meta, "k");
  m.n_train = get_count(meta, "n_train");
  m.spectrum.n = get_count(meta, "spectrum_n");
  if (meta.contains("r_requested") && !meta["r_requested"].is_null()) m.r_requested = get_real(meta, "r_requested");
  m.basis = t.at("basis");
  const std::size_t p = m.basis.rows();
  require_shape(m.basis, p, m.k, "basis");
  const Matrix& sigma = t.at("sigma");
  require_shape(sigma, 1, m.k, "sigma");
  m.sigma = flat(sigma);
  m.spectrum.ratios = flat(t.at("variance_ratios"));
  m.within_inverse_cov.matrix = t.at("within_inverse_cov");
  require_shape(m.within_inverse_cov.matrix, m.k, m.k, "within_inverse_cov");
  m.within_inverse_cov.regularization = get_real(meta, "within_regularization");
  m.within_inverse_cov.effective_rank = get_count(meta, "within_effective_rank");
  if (meta.value("center", false)) {
    const Matrix& c = t.at("center");
    require_shape(c, 1, p, "center");
    m.center = flat(c);
  }
  return m;
}

MahalanobisModel decode_simple(const json& meta, const TensorMap& t) {
  MahalanobisModel m;
  m.mean = flat(t.at("mean"));
  m.inverse_cov.matrix = t.at("inverse_cov");
  require_shape(m.inverse_cov.matrix, m.mean.size(), m.mean.size(), "inverse_cov");
  m.inverse_cov.regularization = get_real(meta, "regularization");
  m.inverse_cov.effective_rank = get_count(meta, "effective_rank");
  return m;
}

ClassMahalanobisModel decode_class(const json& meta, const TensorMap& t) {
  ClassMahalanobisModel m;
  m.centroids = t.at("centroids");
  const std::size_t p = m.centroids.cols();
  m.inverse_cov.matrix = t.at("inverse_cov");
  require_shape(m.inverse_cov.matrix, p, p, "inverse_cov");
  m.inverse_cov.regularization = get_real(meta, "regularization");
  m.inverse_cov.effective_rank = get_count(meta, "effective_rank");
  if (!meta.contains("class_counts") || !meta["class_counts"].is_array()) {
    throw ValidationError("model file: class_counts missing");
  }
  m.class_counts = meta["class_counts"].get<std::vector<std::size_t>>();
  if (m.class_counts.size() != m.centroids.rows()) throw ValidationError("model file: class_counts length");
  return m;
}

}  // namespace

std::optional<CalibratedScorer> StoredScorer::calibrated() const {
  if (!ecdf) return std::nullopt;
  return CalibratedScorer{model, metric, *ecdf};
}

void write_scorer(const StoredScorer& scorer, std::ostream& out) {
  check_metric(scorer.model, scorer.metric);
  json meta;
  Tensors tensors;
  meta["format_version"] = kModelFormatVersion;
  meta["metric"] = std::string(to_string(scorer.metric));
  meta["width"] = model_width(scorer.model);
  std::visit([&](const auto& m) { encode(m, meta, tensors); }, scorer.model);
  meta["calibrated"] = scorer.ecdf.has_value();
  if (scorer.ecdf) {
    meta["validation_count"] = scorer.ecdf->size();
    tensors.add("ecdf", as_row(scorer.ecdf->sorted_values()));
  }
  meta["tensors"] = tensors.names;

  const std::string text = meta.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kModelFormatVersion);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& block : tensors.blocks) write_binary(block, out);
}

StoredScorer read_scorer(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ValidationError("not a dime-scope model file (bad magic)");
  }
  const auto version = get_uint(in, 4);
  if (version != kModelFormatVersion) throw ValidationError("model file: unsupported version " + std::to_string(version));
  const auto length = get_uint(in, 8);
  if (length > (std::uint64_t{1} << 30)) throw ValidationError("model file: implausible metadata length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw ValidationError("model file: truncated metadata");

  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model file: bad metadata: ") + e.what());
  }
  if (!meta.contains("tensors") || !meta["tensors"].is_array() || !meta.contains("kind") || !meta.contains("metric")) {
    throw ValidationError("model file: incomplete metadata");
  }
  std::map<std::string, Matrix> blocks;
  for (const auto& name : meta["tensors"]) {
    if (!name.is_string()) throw ValidationError("model file: tensor names must be strings");
    blocks.emplace(name.get<std::string>(), read_binary(in));
  }
  const TensorMap tensors(std::move(blocks));

  StoredScorer out{ModelledEmbedding{}, parse_metric(meta["metric"].get<std::string>()), std::nullopt};
  const std::string kind = meta["kind"].get<std::string>();
  if (kind == "dime") {
    out.model = decode_dime(meta, tensors);
  } else if (kind == "mahalanobis") {
    out.model = decode_simple(meta, tensors);
  } else if (kind == "class_mahalanobis") {
    out.model = decode_class(meta, tensors);
  } else {
    throw ValidationError("model file: unknown model kind '" + kind + "'");
  }
  check_metric(out.model, out.metric);
  if (meta.value("calibrated", false)) {
    const Matrix& e = tensors.at("ecdf");
    out.ecdf = Ecdf(e.data());
  }
  return out;
}

void save_scorer(const StoredScorer& scorer, const std::filesystem::path& path) {
  write_atomically(path, [&](std::ostream& out) { write_scorer(scorer, out); });
}

StoredScorer load_scorer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  try {
    return read_scorer(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace dime

#include "dime_scope/matrix_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <system_error>

#include "dime_scope/error.hpp"
#include "dime_scope/random.hpp"

#include <unistd.h>

namespace dime {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'I', 'M', 'E'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw ValidationError(std::string("binary matrix: truncated ") + what);
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

void check_embedding(const Matrix& m, const fs::path& path) {
  if (m.rows() == 0 || m.cols() == 0) throw ValidationError(path.string() + ": matrix is empty");
  require_finite(m, path.string().c_str());
}

}  // namespace

MatrixFormat parse_matrix_format(std::string_view name) {
  if (name == "csv") return MatrixFormat::kCsv;
  if (name == "binary" || name == "bin") return MatrixFormat::kBinary;
  throw ValidationError("unknown matrix format '" + std::string(name) + "' (expected csv or binary)");
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw ValidationError("cannot format value");
  return std::string(buf.data(), ptr);
}

void write_binary(const Matrix& m, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kBinaryFormatVersion);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (double v : m.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

Matrix read_binary(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ValidationError("binary matrix: bad magic (expected \"DIME\")");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kBinaryFormatVersion) {
    throw ValidationError("binary matrix: unsupported version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint64_t>(in, "row count");
  const auto cols = get_le<std::uint64_t>(in, "column count");
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw ValidationError("binary matrix: implausible shape");
  std::vector<double> data(rows * cols);
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
  return Matrix(rows, cols, std::move(data));
}

Matrix parse_csv(std::istream& in, CsvOptions options) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (options.skip_header && line_no == 1) continue;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = text.find(',', start);
      const std::string_view cell =
          trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ValidationError("csv: non-numeric cell '" + std::string(cell) + "' at line " + std::to_string(line_no));
      }
      if (!std::isfinite(value)) {
        throw ValidationError("csv: NaN/Inf cell at line " + std::to_string(line_no));
      }
      data.push_back(value);
      ++fields;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      throw ValidationError("csv: ragged row at line " + std::to_string(line_no) + " (" + std::to_string(fields) +
                            " fields, expected " + std::to_string(cols) + ")");
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

void write_csv(const Matrix& m, std::ostream& out) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Matrix load_matrix(const fs::path& path, MatrixFormat format, CsvOptions csv) {
  auto in = open_input(path);
  Matrix m;
  try {
    m = format == MatrixFormat::kBinary ? read_binary(in) : parse_csv(in, csv);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (format == MatrixFormat::kBinary && in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path.string() + ": trailing bytes after binary payload");
  }
  check_embedding(m, path);
  return m;
}

Matrix load_matrix(const fs::path& path, CsvOptions csv) {
  std::array<char, 4> head{};
  {
    auto in = open_input(path);
    in.read(head.data(), head.size());
    if (in.gcount() == static_cast<std::streamsize>(head.size()) && head == kMagic) {
      return load_matrix(path, MatrixFormat::kBinary, csv);
    }
  }
  return load_matrix(path, MatrixFormat::kCsv, csv);
}

void store_matrix(const Matrix& m, const fs::path& path, MatrixFormat format) {
  write_atomically(path, [&](std::ostream& out) {
    if (format == MatrixFormat::kBinary) {
      write_binary(m, out);
    } else {
      write_csv(m, out);
    }
  });
}

std::vector<int> load_labels(const fs::path& path) {
  auto in = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) {
      throw ValidationError(path.string() + ": invalid class label '" + std::string(text) + "' at line " +
                            std::to_string(line_no));
    }
    labels.push_back(value);
  }
  return labels;
}

void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

AxisRole parse_axis_role(std::string_view name) {
  if (name == "observation" || name == "obs") return AxisRole::kObservation;
  if (name == "channel") return AxisRole::kChannel;
  if (name == "spatial") return AxisRole::kSpatial;
  if (name == "temporal") return AxisRole::kTemporal;
  throw ValidationError("unknown axis role '" + std::string(name) + "'");
}

std::vector<AxisRole> parse_axis_roles(std::string_view comma_list) {
  std::vector<AxisRole> roles;
  std::size_t start = 0;
  while (start <= comma_list.size()) {
    const std::size_t comma = comma_list.find(',', start);
    roles.push_back(parse_axis_role(trim(comma_list.substr(start, comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return roles;
}

PoolMode parse_pool_mode(std::string_view name) {
  if (name == "mean") return PoolMode::kMean;
  if (name == "max") return PoolMode::kMax;
  throw ValidationError("unknown pool mode '" + std::string(name) + "' (expected mean or max)");
}

Matrix pool_features(const EmbeddingTensor& tensor, PoolMode mode) {
  const auto& shape = tensor.shape;
  if (shape.size() != tensor.roles.size()) throw ValidationError("pool_features: one role per axis required");
  std::size_t obs_axis = shape.size();
  std::size_t ch_axis = shape.size();
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (tensor.roles[a] == AxisRole::kObservation) {
      if (obs_axis != shape.size()) throw ValidationError("pool_features: more than one observation axis");
      obs_axis = a;
    } else if (tensor.roles[a] == AxisRole::kChannel) {
      if (ch_axis != shape.size()) throw ValidationError("pool_features: more than one channel axis");
      ch_axis = a;
    } else if (shape[a] == 0) {
      throw ValidationError("pool_features: empty spatial/temporal axis");
    }
  }
  if (obs_axis == shape.size()) throw ValidationError("pool_features: no observation axis");
  if (ch_axis == shape.size()) throw ValidationError("pool_features: no channel axis");
  const std::size_t total = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (total != tensor.data.size()) {
    throw ValidationError("pool_features: shape product " + std::to_string(total) + " != data length " +
                          std::to_string(tensor.data.size()));
  }
  require_finite(tensor.data, "pool_features input");

  const std::size_t n = shape[obs_axis];
  const std::size_t p = shape[ch_axis];
  const std::size_t pooled = n * p == 0 ? 0 : total / (n * p);

  // Mean is accumulated as first + Σ(x − first)/m so constant slices pool to
  // exactly their value.
  Matrix out(n, p);
  std::vector<bool> seen(n * p, false);
  std::vector<double> first(n * p, 0.0);
  std::vector<std::size_t> index(shape.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    const std::size_t i = index[obs_axis];
    const std::size_t c = index[ch_axis];
    const double v = tensor.data[flat];
    const std::size_t cell = i * p + c;
    if (!seen[cell]) {
      seen[cell] = true;
      first[cell] = v;
      out(i, c) = mode == PoolMode::kMax ? v : 0.0;
    } else if (mode == PoolMode::kMax) {
      out(i, c) = std::max(out(i, c), v);
    } else {
      out(i, c) += v - first[cell];
    }
    for (std::size_t a = shape.size(); a-- > 0;) {
      if (++index[a] < shape[a]) break;
      index[a] = 0;
    }
  }
  if (mode == PoolMode::kMean) {
    for (std::size_t cell = 0; cell < n * p; ++cell) {
      out.data()[cell] = first[cell] + out.data()[cell] / static_cast<double>(pooled);
    }
  }
  return out;
}

LabeledSplit split(const Matrix& matrix, double validation_fraction, std::uint64_t seed,
                   std::optional<std::span<const int>> labels) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("split: validation fraction must lie in (0, 1)");
  }
  const std::size_t n = matrix.rows();
  if (labels && labels->size() != n) throw ValidationError("split: label count does not match row count");
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n < 2 || n_val == 0 || n_val >= n) {
    throw ValidationError("split: fraction " + format_double(validation_fraction) + " of " + std::to_string(n) +
                          " rows leaves an empty partition");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  LabeledSplit out{matrix.select_rows(train), matrix.select_rows(val), std::nullopt};
  if (labels) {
    std::vector<int> l(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) l[i] = (*labels)[train[i]];
    out.labels = std::move(l);
  }
  return out;
}

}  // namespace dime

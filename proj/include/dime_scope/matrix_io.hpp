#pragma once

// On-disk matrix formats, feature pooling, and train/validation splitting.
//
// Binary layout (all integers and floats little-endian):
//   bytes 0-3    magic "DIME"
//   bytes 4-7    u32 format version (= 1)
//   bytes 8-15   u64 row count
//   bytes 16-23  u64 column count
//   bytes 24-    rows·cols IEEE-754 float64, row-major
//
// CSV: one row per line, comma separated, '.' decimal point, no header unless
// `skip_header` is set. Values are written in shortest round-trip form.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dime_scope/matrix.hpp"

namespace dime {

enum class MatrixFormat { kCsv, kBinary };

MatrixFormat parse_matrix_format(std::string_view name);

struct CsvOptions {
  bool skip_header = false;
};

inline constexpr std::uint32_t kBinaryFormatVersion = 1;

// Loads an embedding matrix. Rejects empty matrices and NaN/Inf cells.
Matrix load_matrix(const std::filesystem::path& path, MatrixFormat format, CsvOptions csv = {});
// Chooses binary when the file starts with the "DIME" magic, CSV otherwise.
Matrix load_matrix(const std::filesystem::path& path, CsvOptions csv = {});
void store_matrix(const Matrix& m, const std::filesystem::path& path, MatrixFormat format);

// Stream-level codecs, shared with model serialization. read_binary accepts
// any shape, including empty ones.
Matrix read_binary(std::istream& in);
void write_binary(const Matrix& m, std::ostream& out);
Matrix parse_csv(std::istream& in, CsvOptions options = {});
void write_csv(const Matrix& m, std::ostream& out);

// One integer per line.
std::vector<int> load_labels(const std::filesystem::path& path);

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

// Writes through a temporary file in the destination directory and renames it
// into place, so `path` either keeps its old content or receives the full new
// content. Failures raise IoError.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

enum class AxisRole { kObservation, kChannel, kSpatial, kTemporal };

AxisRole parse_axis_role(std::string_view name);
std::vector<AxisRole> parse_axis_roles(std::string_view comma_list);

// Pre-pooling layer output. `data` is row-major over `shape`.
struct EmbeddingTensor {
  std::vector<std::size_t> shape;
  std::vector<AxisRole> roles;
  std::vector<double> data;
};

enum class PoolMode { kMean, kMax };

PoolMode parse_pool_mode(std::string_view name);

// Collapses every spatial and temporal axis (mean or elementwise max),
// leaving one row per observation and one column per channel.
Matrix pool_features(const EmbeddingTensor& tensor, PoolMode mode);

struct LabeledSplit {
  Matrix train;
  Matrix validation;
  std::optional<std::vector<int>> labels;  // per train row
};

// Deterministic random partition. The validation part holds
// round(fraction·n) rows; both parts keep the original row order.
LabeledSplit split(const Matrix& matrix, double validation_fraction, std::uint64_t seed,
                   std::optional<std::span<const int>> labels = std::nullopt);

}  // namespace dime

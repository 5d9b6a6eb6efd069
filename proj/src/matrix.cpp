#include "dime_scope/matrix.hpp"

#include <cmath>
#include <string>

#include "dime_scope/error.hpp"

namespace dime {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ValidationError("matrix data length " + std::to_string(data_.size()) +
                          " does not match shape " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ValidationError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("multiply: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      auto brow = b.row(l);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += ail * brow[j];
    }
  }
  return c;
}

Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ValidationError("multiply_at_b: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t l = 0; l < a.rows(); ++l) {
    auto arow = a.row(l);
    auto brow = b.row(l);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      auto out = c.row(i);
      const double ali = arow[i];
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += ali * brow[j];
    }
  }
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ValidationError("subtract: shapes differ");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

double frobenius_norm_sq(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void require_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError(std::string(what) + ": non-finite value at element " + std::to_string(i));
    }
  }
}

void require_finite(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw ValidationError(std::string(what) + ": non-finite value at row " + std::to_string(i) +
                              ", column " + std::to_string(j));
      }
    }
  }
}

}  // namespace dime

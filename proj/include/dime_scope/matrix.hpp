#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dime {

// Dense row-major matrix of doubles. Rows are observations wherever the
// matrix holds embeddings.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  // A single row holding `values`.
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::vector<double> column(std::size_t j) const;
  Matrix transposed() const;
  // Rows selected by index, in the order given.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
// aᵀ·b without materializing the transpose.
Matrix multiply_at_b(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm_sq(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);

// Throws ValidationError naming `what` when any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);
void require_finite(std::span<const double> v, const char* what);

}  // namespace dime

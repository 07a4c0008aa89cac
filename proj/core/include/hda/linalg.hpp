#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hda {

using Vector = std::vector<double>;

/// Dense row-major matrix. Vectors that live on the autodiff tape are
/// represented as n x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix column(std::span<const double> values);
  static Matrix scalar(double value) { return Matrix(1, 1, value); }
  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// Builds a rows x cols matrix whose columns are the given vectors.
  static Matrix from_columns(std::span<const Vector> columns);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  Vector column_vector(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);
  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Kernels shared by the plain and the tape code paths. Keeping a single loop
// order for each makes the two paths agree bit-for-bit.
Vector matvec(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
Vector add(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);
bool all_finite(std::span<const double> a);

/// Thin singular value decomposition a = u * diag(s) * v^T of an m x n matrix,
/// computed with one-sided (Hestenes) Jacobi rotations. `u` is m x n with
/// unit columns wherever the singular value is nonzero; singular values are
/// sorted in descending order.
struct ThinSvd {
  Matrix u;
  Vector singular_values;
  Matrix v;
};

ThinSvd thin_svd(const Matrix& a);

/// Modified Gram-Schmidt with a second re-orthogonalization pass. Throws
/// NumericalError if a column becomes numerically dependent.
void orthonormalize_columns(Matrix& m);

}  // namespace hda

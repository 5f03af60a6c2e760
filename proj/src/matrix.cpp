#include "sfspec/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfspec {

namespace {

void check_positive_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("matrix dimensions must be positive");
  }
}

void check_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("matrix entries must be finite");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  check_positive_dims(rows, cols);
  if (!std::isfinite(fill)) throw std::invalid_argument("matrix entries must be finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  check_positive_dims(rows, cols);
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("matrix entry count does not match rows*cols");
  }
  check_finite(data_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  check_positive_dims(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  check_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  check_finite(m.data_);
  return m;
}

Matrix Matrix::diagonal(std::initializer_list<double> diag) {
  return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

bool Matrix::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return x == 0.0; });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "matrix add");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "matrix subtract");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix& Matrix::axpy(double alpha, const Matrix& other) {
  require_same_shape(*this, other, "axpy");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += alpha * other.data_[k];
  return *this;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] *= bv[k];
  return out;
}

Matrix lincomb(double a, const Matrix& x, double b, const Matrix& y) {
  require_same_shape(x, y, "lincomb");
  Matrix out(x.rows(), x.cols());
  auto o = out.data();
  auto xv = x.data();
  auto yv = y.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = a * xv[k] + b * yv[k];
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t k = 0; k < av.size(); ++k) m = std::max(m, std::abs(av[k] - bv[k]));
  return m;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
}

}  // namespace sfspec

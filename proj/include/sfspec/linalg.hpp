#pragma once

#include <vector>

#include "sfspec/matrix.hpp"

namespace sfspec {

/// Thin SVD A = U diag(sigma) V^T with r = min(m, n).
struct SvdResult {
  Matrix u;                             // m x r, orthonormal columns
  std::vector<double> singular_values;  // length r, nonincreasing
  Matrix v;                             // n x r, orthonormal columns

  std::size_t rank_dim() const { return singular_values.size(); }
  Matrix reconstruct() const;
};

/// Standard product with a fixed i-k-j summation order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double trace(const Matrix& a);

/// Frobenius inner product sum_ij a_ij b_ij.
double frobenius_inner(const Matrix& a, const Matrix& b);

/// One-sided (Hestenes) Jacobi SVD.
///
/// Singular values come out nonincreasing. Each (u_i, v_i) pair is signed so
/// that the largest-magnitude entry of u_i is nonnegative. Columns of U for
/// zero singular values are completed to an orthonormal set. Throws
/// NumericalError when 100 sweeps do not orthogonalize the columns.
SvdResult svd(const Matrix& a);

double operator_norm(const Matrix& a);
double nuclear_norm(const Matrix& a);

/// Singular values below this are treated as zero when forming the polar
/// factor: max(m, n) * eps * sigma_max.
double rank_tolerance(const SvdResult& s, std::size_t rows, std::size_t cols);

}  // namespace sfspec

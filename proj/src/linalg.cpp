#include "sfspec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sfspec/errors.hpp"

namespace sfspec {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Rotates the column pair (x, y) in place: x' = c x - s y, y' = s x + c y.
void rotate(std::vector<double>& x, std::vector<double>& y, double c, double s) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xi = x[k];
    const double yi = y[k];
    x[k] = c * xi - s * yi;
    y[k] = s * xi + c * yi;
  }
}

// Fills basis[j] for every j in `missing` with unit vectors orthogonal to all
// other columns, trying standard basis vectors in order.
void complete_orthonormal(std::vector<std::vector<double>>& basis,
                          const std::vector<bool>& missing) {
  const std::size_t dim = basis.empty() ? 0 : basis[0].size();
  std::size_t next_candidate = 0;
  std::vector<bool> filled(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) filled[j] = !missing[j];
  for (std::size_t j = 0; j < basis.size(); ++j) {
    if (filled[j]) continue;
    while (next_candidate < dim) {
      std::vector<double> cand(dim, 0.0);
      cand[next_candidate++] = 1.0;
      // Two passes of modified Gram-Schmidt.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < basis.size(); ++k) {
          if (!filled[k]) continue;
          const double p = dot(cand, basis[k]);
          for (std::size_t i = 0; i < dim; ++i) cand[i] -= p * basis[k][i];
        }
      }
      const double nrm = std::sqrt(dot(cand, cand));
      if (nrm > 0.5) {
        for (double& x : cand) x /= nrm;
        basis[j] = std::move(cand);
        filled[j] = true;
        break;
      }
    }
    if (!filled[j]) throw NumericalError("svd: failed to complete orthonormal basis");
  }
}

}  // namespace

Matrix SvdResult::reconstruct() const {
  Matrix us = u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= singular_values[j];
  return matmul_transposed(us, v);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " + a.shape_string() + " * " +
                                b.shape_string());
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* crow = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_transposed: dimension mismatch " + a.shape_string() +
                                " * (" + b.shape_string() + ")^T");
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_inner");
  double s = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return s;
}

SvdResult svd(const Matrix& a) {
  // Work on W (p x q, p >= q); transpose wide inputs and swap factors at the end.
  const bool wide = a.rows() < a.cols();
  const Matrix w = wide ? a.transpose() : a;
  const std::size_t p = w.rows();
  const std::size_t q = w.cols();

  // Scale by a power of two so the largest entry lies in [0.5, 1); this is exact
  // and keeps the Gram products clear of underflow.
  double max_abs = 0.0;
  for (double x : w.data()) max_abs = std::max(max_abs, std::abs(x));
  int exponent = 0;
  if (max_abs > 0.0) std::frexp(max_abs, &exponent);

  std::vector<std::vector<double>> cols(q, std::vector<double>(p));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) cols[j][i] = std::ldexp(w(i, j), -exponent);
  std::vector<std::vector<double>> vcols(q, std::vector<double>(q, 0.0));
  for (std::size_t j = 0; j < q; ++j) vcols[j][j] = 1.0;

  const double tol = static_cast<double>(p) * kEps;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        const double alpha = dot(cols[i], cols[i]);
        const double beta = dot(cols[j], cols[j]);
        const double gamma = dot(cols[i], cols[j]);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        // A rotation this small leaves the columns unchanged in double precision.
        if (std::abs(t) < kEps * kEps) continue;
        converged = false;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(cols[i], cols[j], c, s);
        rotate(vcols[i], vcols[j], c, s);
      }
    }
  }
  if (!converged) throw NumericalError("svd: Jacobi sweeps did not converge");

  std::vector<double> sigma(q);
  for (std::size_t j = 0; j < q; ++j) sigma[j] = std::sqrt(dot(cols[j], cols[j]));
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  std::vector<std::vector<double>> left(q);
  std::vector<std::vector<double>> right(q);
  std::vector<double> sv(q);
  std::vector<bool> missing(q, false);
  const double sigma_max = q > 0 ? sigma[order[0]] : 0.0;
  const double null_tol = sigma_max * static_cast<double>(p) * kEps;
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t j = order[k];
    sv[k] = std::ldexp(sigma[j], exponent);
    right[k] = vcols[j];
    left[k] = cols[j];
    if (sigma[j] <= null_tol || sigma[j] == 0.0) {
      missing[k] = true;
    } else {
      for (double& x : left[k]) x /= sigma[j];
    }
  }
  complete_orthonormal(left, missing);

  // left holds columns of the W-side U (length p), right the W-side V (length q).
  auto& ucols = wide ? right : left;
  auto& vcols_out = wide ? left : right;
  for (std::size_t k = 0; k < q; ++k) {
    const auto& uk = ucols[k];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < uk.size(); ++i)
      if (std::abs(uk[i]) > std::abs(uk[arg])) arg = i;
    if (uk[arg] < 0.0) {
      for (double& x : ucols[k]) x = -x;
      for (double& x : vcols_out[k]) x = -x;
    }
  }

  SvdResult out{Matrix(a.rows(), q), std::move(sv), Matrix(a.cols(), q)};
  for (std::size_t k = 0; k < q; ++k) {
    for (std::size_t i = 0; i < a.rows(); ++i) out.u(i, k) = ucols[k][i];
    for (std::size_t i = 0; i < a.cols(); ++i) out.v(i, k) = vcols_out[k][i];
  }
  return out;
}

double operator_norm(const Matrix& a) { return svd(a).singular_values.front(); }

double nuclear_norm(const Matrix& a) {
  const auto s = svd(a);
  return std::accumulate(s.singular_values.begin(), s.singular_values.end(), 0.0);
}

double rank_tolerance(const SvdResult& s, std::size_t rows, std::size_t cols) {
  const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
  return static_cast<double>(std::max(rows, cols)) * kEps * smax;
}

}  // namespace sfspec

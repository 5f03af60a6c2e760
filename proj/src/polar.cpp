#include "sfspec/polar.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sfspec/linalg.hpp"

namespace sfspec {

namespace {

// Row-major r x c buffer kernels for the Newton-Schulz loop, templated so the
// reduced-precision path rounds every intermediate to float.
template <typename T>
std::vector<T> gram(const std::vector<T>& x, std::size_t r, std::size_t c) {
  std::vector<T> g(r * r, T(0));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i; j < r; ++j) {
      T s = 0;
      for (std::size_t k = 0; k < c; ++k) s += x[i * c + k] * x[j * c + k];
      g[i * r + j] = s;
      g[j * r + i] = s;
    }
  }
  return g;
}

template <typename T>
std::vector<T> mul(const std::vector<T>& a, const std::vector<T>& b, std::size_t n,
                   std::size_t inner, std::size_t m) {
  std::vector<T> out(n * m, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.data() + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = a[i * inner + k];
      const T* brow = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

template <typename T>
std::vector<double> newton_schulz_kernel(const Matrix& wide, const PolarConfig& cfg) {
  const std::size_t r = wide.rows();
  const std::size_t c = wide.cols();
  std::vector<T> x(wide.size());
  auto src = wide.data();
  T norm2 = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = static_cast<T>(src[k]);
    norm2 += x[k] * x[k];
  }
  const T scale = T(1) / (std::sqrt(norm2) + static_cast<T>(cfg.eps));
  for (T& v : x) v *= scale;

  const T a = static_cast<T>(cfg.a);
  const T b = static_cast<T>(cfg.b);
  const T cc = static_cast<T>(cfg.c);
  for (int it = 0; it < cfg.steps; ++it) {
    const auto ga = gram(x, r, c);          // A = X X^T
    const auto gb = mul(ga, x, r, r, c);    // B = A X
    const auto gab = mul(ga, gb, r, r, c);  // A B
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = a * x[k] + b * gb[k] + cc * gab[k];
  }
  return std::vector<double>(x.begin(), x.end());
}

}  // namespace

void PolarConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("PolarConfig.steps must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("PolarConfig.eps must be > 0");
}

Matrix exact_polar(const Matrix& m) {
  if (m.is_zero()) return Matrix(m.rows(), m.cols());
  const auto s = svd(m);
  const double tol = rank_tolerance(s, m.rows(), m.cols());
  Matrix out(m.rows(), m.cols());
  for (std::size_t k = 0; k < s.rank_dim(); ++k) {
    if (!(s.singular_values[k] > tol)) break;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double uik = s.u(i, k);
      for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) += uik * s.v(j, k);
    }
  }
  return out;
}

Matrix newton_schulz_polar(const Matrix& m, const PolarConfig& cfg) {
  cfg.validate();
  if (m.is_zero()) return Matrix(m.rows(), m.cols());
  const bool tall = m.rows() > m.cols();
  // Transpose before normalizing so that M and M^T follow identical arithmetic.
  const Matrix wide = tall ? m.transpose() : m;
  auto vals = cfg.reduced_precision ? newton_schulz_kernel<float>(wide, cfg)
                                    : newton_schulz_kernel<double>(wide, cfg);
  Matrix out(wide.rows(), wide.cols(), std::move(vals));
  return tall ? out.transpose() : out;
}

Matrix polar(const Matrix& m, PolarBackend backend, const PolarConfig& cfg) {
  return backend == PolarBackend::exact ? exact_polar(m) : newton_schulz_polar(m, cfg);
}

double dual_pairing(const Matrix& g, const Matrix& u) { return frobenius_inner(g, u); }

}  // namespace sfspec

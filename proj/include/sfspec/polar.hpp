#pragma once

#include "sfspec/matrix.hpp"

namespace sfspec {

/// Newton-Schulz settings. Defaults are the quintic coefficients used by the
/// reference Muon kernel.
struct PolarConfig {
  int steps = 5;
  double eps = 1e-7;
  double a = 3.4445;
  double b = -4.7750;
  double c = 2.0315;
  /// Run the iteration in 32-bit floats instead of doubles.
  bool reduced_precision = false;

  void validate() const;
};

enum class PolarBackend { exact, newton_schulz };

/// U V^T from the thin SVD, keeping only numerically nonzero singular values.
/// The zero matrix maps to the zero matrix.
Matrix exact_polar(const Matrix& m);

/// Approximate polar factor by a fixed number of Newton-Schulz rounds.
///
/// Tall inputs are transposed so the iteration runs on the wide orientation
/// (the Gram matrix X X^T is then the smaller one) and transposed back. The
/// zero matrix maps to the zero matrix.
Matrix newton_schulz_polar(const Matrix& m, const PolarConfig& cfg = {});

Matrix polar(const Matrix& m, PolarBackend backend, const PolarConfig& cfg = {});

/// Frobenius pairing <G, U> = tr(G^T U).
double dual_pairing(const Matrix& g, const Matrix& u);

}  // namespace sfspec

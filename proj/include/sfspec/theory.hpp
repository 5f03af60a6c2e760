#pragma once

#include <cstdint>
#include <string_view>

#include "sfspec/matrix.hpp"

namespace sfspec {

/// Which smoothness geometry the constants L and D refer to.
enum class NormMode { frobenius, spectral };

std::string_view to_string(NormMode m);
NormMode parse_norm_mode(std::string_view s);

/// Constants of the stationarity bound for schedule-free spectral descent
/// with momentum.
struct TheoryInputs {
  double delta = 1.0;  ///< f(Y_1) - f*
  double smoothness = 1.0;  ///< L_F or L_S
  double diameter = 1.0;    ///< D_F or D_S
  std::int64_t r = 1;       ///< min(m, n)
  double sigma = 0.0;
  std::int64_t batch = 1;
  double beta = 0.0;
  double mu = 0.0;
  double eta = 1.0;
  std::int64_t horizon = 1;  ///< T
  NormMode norm_mode = NormMode::frobenius;

  void validate() const;
};

/// Right-hand side of the stationarity bound, split by origin.
struct BoundTerms {
  double descent = 0.0;
  double noise = 0.0;
  double drift = 0.0;     ///< schedule-free averaging drift
  double tracking = 0.0;  ///< constant step and momentum tracking
  double total() const { return descent + noise + drift + tracking; }
};

inline constexpr double kBaselTail = 1.6449340668482264;  // pi^2 / 6

/// log(eT) = 1 + ln T.
double log_e_t(std::int64_t horizon);

/// Evaluates the bound on (1/T) sum_t E||grad f(Y_t)||_*.
///
/// Frobenius mode uses the four-term form
///   (D + 2 L D_F^2 (log eT + pi^2/6)) / ((1-b) T eta)
///   + 2 sqrt(r) s / ((1-b) sqrt B) * (sqrt((1-mu)/(1+mu)) + 1/((1-mu) T))
///   + 2 sqrt(r) L D_F log(eT) / ((1-b) T) * (1+mu)/(1-mu)
///   + L r eta / (1-b) * (1+3mu)/(1-mu).
/// Spectral mode uses the spectral-smoothness constants L_S, D_S, in which the
/// tracking term is L eta / (2(1-b)) + 2 mu L eta / ((1-b)(1-mu)) and the
/// drift term carries no sqrt(r).
BoundTerms stationarity_terms(const TheoryInputs& in);
double stationarity_bound(const TheoryInputs& in);

struct TunedHyperparams {
  double mu = 0.0;
  double eta = 0.0;
  double alpha = 1.0;  ///< 1 - mu
  double predicted_bound = 0.0;
};

/// Leading-order (mu, eta) minimizing the bound for the horizon in `in`.
/// `in.mu` and `in.eta` are ignored. Noiseless inputs give mu = 0.
TunedHyperparams tuned_hyperparams(const TheoryInputs& in);

/// Cap on ||Z_t||_F under decay at Z: z0 (1 - eta lambda)^t + 0.2 sqrt(mn) / lambda.
double z_norm_cap(double z0_norm, std::int64_t t, double eta, double lambda, std::int64_t m,
                  std::int64_t n);

/// Quasi steady-state RMS norm of Z: (0.1 / lambda) (-alpha + sqrt(alpha^2 + 2 eta lambda)).
double steady_state_rms(double alpha, double eta, double lambda);

/// The steady-state formula linearizes in eta*lambda; above this it is only
/// indicative.
inline constexpr double kSteadyStateEtaLambdaLimit = 0.01;
bool steady_state_regime_ok(double eta, double lambda);

/// Leading eigenvalue of the long-horizon norm recursion under decay at Y:
/// 1 + (eta lambda / 2)(sqrt(1 + 6 beta + beta^2) - (1 - beta)).
double decay_at_y_growth(double beta, double eta, double lambda);

struct Diagnostics {
  double rho = 0.0;    ///< ||Z||_F / sqrt(mn)
  double alpha = 0.0;  ///< cosine between update direction and Z, 0 if either is zero
};

Diagnostics diagnostics(const Matrix& z, const Matrix& p_hat);

/// |rho_next - rho_prev| / rho_prev; 0 for 0 -> 0 and +inf for 0 -> positive.
double qss_ratio(double rho_prev, double rho_next);

}  // namespace sfspec

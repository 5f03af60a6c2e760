#include "sfspec/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "sfspec/errors.hpp"
#include "sfspec/linalg.hpp"

namespace sfspec {

std::string_view to_string(NormMode m) { return m == NormMode::frobenius ? "frobenius" : "spectral"; }

NormMode parse_norm_mode(std::string_view s) {
  if (s == "frobenius") return NormMode::frobenius;
  if (s == "spectral") return NormMode::spectral;
  throw ConfigError("unknown norm_mode: '" + std::string(s) + "'");
}

void TheoryInputs::validate() const {
  auto fail = [](const char* msg) { throw std::invalid_argument(std::string("theory inputs: ") + msg); };
  if (!(delta >= 0.0)) fail("delta must be >= 0");
  if (!(smoothness > 0.0)) fail("smoothness constant must be > 0");
  if (!(diameter > 0.0)) fail("diameter must be > 0");
  if (r < 1) fail("r must be >= 1");
  if (!(sigma >= 0.0)) fail("sigma must be >= 0");
  if (batch < 1) fail("batch must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) fail("beta must be in [0, 1)");
  if (!(mu >= 0.0 && mu < 1.0)) fail("mu must be in [0, 1)");
  if (!(eta > 0.0)) fail("eta must be > 0");
  if (horizon < 1) fail("T must be >= 1");
}

double log_e_t(std::int64_t horizon) { return 1.0 + std::log(static_cast<double>(horizon)); }

BoundTerms stationarity_terms(const TheoryInputs& in) {
  in.validate();
  const double T = static_cast<double>(in.horizon);
  const double L = in.smoothness;
  const double D = in.diameter;
  const double sr = std::sqrt(static_cast<double>(in.r));
  const double r = static_cast<double>(in.r);
  const double sb = std::sqrt(static_cast<double>(in.batch));
  const double one_b = 1.0 - in.beta;
  const double mu = in.mu;
  const double le = log_e_t(in.horizon);

  BoundTerms t;
  t.descent = (in.delta + 2.0 * L * D * D * (le + kBaselTail)) / (one_b * T * in.eta);
  const double noise_scale = 2.0 * sr * in.sigma / (one_b * sb);
  t.noise = noise_scale * (std::sqrt((1.0 - mu) / (1.0 + mu)) + 1.0 / ((1.0 - mu) * T));
  if (in.norm_mode == NormMode::frobenius) {
    t.drift = 2.0 * sr * L * D * le / (one_b * T) * ((1.0 + mu) / (1.0 - mu));
    t.tracking = L * r * in.eta / one_b * ((1.0 + 3.0 * mu) / (1.0 - mu));
  } else {
    t.drift = 2.0 * L * D * le / (one_b * T) * (1.0 + 2.0 * mu / (1.0 - mu));
    t.tracking = L * in.eta / (2.0 * one_b) + 2.0 * mu * L * in.eta / (one_b * (1.0 - mu));
  }
  return t;
}

double stationarity_bound(const TheoryInputs& in) { return stationarity_terms(in).total(); }

TunedHyperparams tuned_hyperparams(const TheoryInputs& in) {
  TheoryInputs probe = in;
  probe.mu = 0.0;
  probe.eta = 1.0;
  probe.validate();

  const double T = static_cast<double>(in.horizon);
  const double L = in.smoothness;
  const double D = in.diameter;
  const double r = static_cast<double>(in.r);
  const double B = static_cast<double>(in.batch);
  const double a_t = in.delta + 2.0 * L * D * D * (log_e_t(in.horizon) + kBaselTail);
  // Frobenius mode carries r in the tracking term, spectral mode in the noise
  // balance; r cancels from alpha in the former and from eta in the latter.
  const double eta_r = in.norm_mode == NormMode::frobenius ? r : 1.0;
  const double alpha_r = in.norm_mode == NormMode::frobenius ? 1.0 : r;

  TunedHyperparams out;
  if (in.sigma == 0.0) {
    out.alpha = 1.0;
  } else {
    out.alpha = std::min(1.0, 2.0 * std::sqrt(a_t * L * B / (alpha_r * in.sigma * in.sigma * T)));
  }
  out.mu = 1.0 - out.alpha;
  out.eta = std::sqrt(2.0 * a_t * out.alpha / (L * eta_r * T * (4.0 - 3.0 * out.alpha)));
  probe.mu = out.mu;
  probe.eta = out.eta;
  out.predicted_bound = stationarity_bound(probe);
  return out;
}

double z_norm_cap(double z0_norm, std::int64_t t, double eta, double lambda, std::int64_t m,
                  std::int64_t n) {
  const double el = eta * lambda;
  if (!(el > 0.0 && el < 1.0)) throw std::invalid_argument("z_norm_cap requires 0 < eta*lambda < 1");
  if (t < 0 || m < 1 || n < 1 || z0_norm < 0.0) throw std::invalid_argument("z_norm_cap: bad arguments");
  return z0_norm * std::pow(1.0 - el, static_cast<double>(t)) +
         0.2 * std::sqrt(static_cast<double>(m) * static_cast<double>(n)) / lambda;
}

double steady_state_rms(double alpha, double eta, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("steady_state_rms requires lambda > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("steady_state_rms requires eta > 0");
  return (0.1 / lambda) * (-alpha + std::sqrt(alpha * alpha + 2.0 * eta * lambda));
}

bool steady_state_regime_ok(double eta, double lambda) {
  return eta * lambda <= kSteadyStateEtaLambdaLimit;
}

double decay_at_y_growth(double beta, double eta, double lambda) {
  const double el = eta * lambda;
  return 1.0 + 0.5 * el * (std::sqrt(1.0 + 6.0 * beta + beta * beta) - (1.0 - beta));
}

Diagnostics diagnostics(const Matrix& z, const Matrix& p_hat) {
  require_same_shape(z, p_hat, "diagnostics");
  Diagnostics d;
  const double zn = frobenius_norm(z);
  const double pn = frobenius_norm(p_hat);
  d.rho = zn / std::sqrt(static_cast<double>(z.rows()) * static_cast<double>(z.cols()));
  if (zn > 0.0 && pn > 0.0) {
    d.alpha = std::clamp(frobenius_inner(p_hat, z) / (pn * zn), -1.0, 1.0);
  }
  return d;
}

double qss_ratio(double rho_prev, double rho_next) {
  if (rho_prev == 0.0) return rho_next == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(rho_next - rho_prev) / rho_prev;
}

}  // namespace sfspec

#include "sfspec/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sfspec {

double warmup_lr(std::int64_t t, double eta, std::int64_t warmup_steps) {
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
  return eta * std::min(1.0, static_cast<double>(t) / static_cast<double>(warmup_steps));
}

double cosine_lr(std::int64_t t, std::int64_t total, double eta) {
  if (total < 1) throw std::invalid_argument("cosine_lr: total must be >= 1");
  if (t >= total) return 0.0;
  const double frac = static_cast<double>(std::max<std::int64_t>(t, 0)) / static_cast<double>(total);
  return eta * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double adam_bias_lr(std::int64_t t, double eta_warm, double beta2) {
  return eta_warm * std::sqrt(1.0 - std::pow(beta2, static_cast<double>(t)));
}

std::pair<AveragingState, double> averaging_weight(AveragingState state, double eta_t) {
  if (eta_t < 0.0) throw std::invalid_argument("averaging_weight: eta_t must be >= 0");
  const double w = eta_t * eta_t;
  state.weight_sum += w;
  state.t += 1;
  const double c = state.weight_sum == 0.0 ? 1.0 : w / state.weight_sum;
  return {state, c};
}

double uniform_weight(std::int64_t t) { return 1.0 / static_cast<double>(t + 1); }

}  // namespace sfspec

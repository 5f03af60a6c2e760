#pragma once

#include <cstdint>
#include <utility>

namespace sfspec {

/// How the schedule-free average X is weighted.
enum class AveragingMode {
  uniform,        ///< c_{t+1} = 1/(t+1): X_T is the plain mean of Z_1..Z_T
  lr_squared,     ///< c_{t+1} = eta_t^2 / sum_{s<=t} eta_s^2
};

/// Accumulator for the eta^2-weighted averaging coefficient.
struct AveragingState {
  double weight_sum = 0.0;  // s_t
  std::int64_t t = 0;       // steps taken
};

/// eta * min(1, t / warmup_steps).
double warmup_lr(std::int64_t t, double eta, std::int64_t warmup_steps);

/// eta * (1 + cos(pi t / total)) / 2. Compose with warmup_lr for a warmed-up
/// cosine schedule.
double cosine_lr(std::int64_t t, std::int64_t total, double eta);

/// eta_warm * sqrt(1 - beta2^t), the Adam bias correction folded into the rate.
double adam_bias_lr(std::int64_t t, double eta_warm, double beta2);

/// Advances the accumulator by eta_t^2 and returns c = eta_t^2 / s. When both
/// eta_t and the accumulator are zero, c is 1.
std::pair<AveragingState, double> averaging_weight(AveragingState state, double eta_t);

/// c_{t+1} = 1/(t+1) for a 1-based step index t.
double uniform_weight(std::int64_t t);

}  // namespace sfspec

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfspec/matrix.hpp"
#include "sfspec/polar.hpp"
#include "sfspec/schedules.hpp"

namespace sfspec {

enum class DecayPlacement { none, at_y, at_z };

enum class OptimizerKind {
  sf_sgd,
  sf_adamw,
  sf_spectral_momentum,
  sf_normuon,
  adamw_cosine,
  normuon_cosine,
};

enum class Mode { train, eval };

/// Dimension factor in the RMS-matching step size 0.2 * eta * sqrt(dim) / ||P_hat||.
enum class RmsDim { product, max_side };

/// First momentum value: M_1 = G_1, or M_1 = (1 - mu) G_1 from a zero buffer.
enum class MomentumInit { first_gradient, zero };

std::string_view to_string(OptimizerKind k);
std::string_view to_string(DecayPlacement d);
std::string_view to_string(Mode m);
std::string_view to_string(AveragingMode a);
std::string_view to_string(RmsDim r);
std::string_view to_string(MomentumInit m);
std::string_view to_string(PolarBackend b);
OptimizerKind parse_optimizer_kind(std::string_view s);
DecayPlacement parse_decay(std::string_view s);
AveragingMode parse_averaging(std::string_view s);
RmsDim parse_rms_dim(std::string_view s);
MomentumInit parse_momentum_init(std::string_view s);
PolarBackend parse_polar_backend(std::string_view s);

bool is_schedule_free(OptimizerKind k);
bool is_spectral(OptimizerKind k);

struct Hyperparams {
  double eta = 0.008;
  double beta1 = 0.9;   ///< SF interpolation weight (first moment for AdamW)
  double beta2 = 0.95;  ///< second-moment decay
  double mu = 0.8;      ///< explicit momentum
  double eps = 1e-8;
  double lambda = 0.05;
  std::int64_t warmup_steps = 2000;
  double rms_scale = 0.2;
  DecayPlacement decay = DecayPlacement::at_z;
  AveragingMode averaging = AveragingMode::lr_squared;
  /// Decay uses the warmed-up rate eta_t; false uses the base eta.
  bool decay_uses_warmup = true;
  RmsDim rms_dim = RmsDim::product;
  MomentumInit momentum_init = MomentumInit::first_gradient;
  bool row_normalization = true;
  PolarBackend polar_backend = PolarBackend::newton_schulz;
  PolarConfig polar{};
  /// Horizon for the cosine baselines; ignored by schedule-free kinds.
  std::int64_t total_steps = 0;
  /// Betas applied to vector (non-matrix) parameters routed to SF-AdamW.
  double vector_beta1 = 0.95;
  double vector_beta2 = 0.99;

  /// Best-known settings per optimizer kind.
  static Hyperparams defaults_for(OptimizerKind kind);
  void validate(OptimizerKind kind) const;
};

/// Per-parameter optimizer state.
///
/// In train mode `live` holds the gradient point Y; in eval mode it holds the
/// average X. X is never stored separately except when beta1 == 0, where it
/// cannot be recovered from Y and Z.
struct ParamState {
  OptimizerKind kind = OptimizerKind::sf_normuon;
  Matrix live;
  Matrix z;    // empty for scheduled baselines
  Matrix mom;  // empty when unused
  Matrix v;    // m x 1 row moments (NorMuon) or m x n elementwise (Adam)
  std::optional<Matrix> x;
  AveragingState avg;
  Mode mode = Mode::train;
  std::int64_t step = 0;
};

/// Telemetry from one parameter update.
struct StepInfo {
  double eta_t = 0.0;
  double c = 0.0;
  double alpha = 0.0;          ///< cosine of update direction and Z_t (pre-update)
  double z_norm_before = 0.0;  ///< ||Z_t||_F (live weights for scheduled kinds)
  double z_norm_after = 0.0;   ///< ||Z_{t+1}||_F
  double decay_rate = 0.0;     ///< rate multiplying lambda in this step
  double update_norm = 0.0;    ///< Frobenius norm of the non-decay step
};

ParamState init_state(OptimizerKind kind, const Matrix& w0, const Hyperparams& hp);

Matrix sf_interpolate_y(const Matrix& x, const Matrix& z, double beta);
Matrix sf_average_x(const Matrix& x, const Matrix& z_next, double c);

/// X implied by the state, regardless of mode.
Matrix current_x(const ParamState& s, double beta1);

/// Plain schedule-free SGD: z <- z - eta_t g, then the X and Y updates.
StepInfo sf_sgd_step(ParamState& s, const Matrix& grad_at_y, const Hyperparams& hp);

/// Schedule-free AdamW with bias-corrected warmup and selectable decay site.
StepInfo sf_adamw_step(ParamState& s, const Matrix& grad_at_y, const Hyperparams& hp);

/// Schedule-free spectral descent with momentum, in its analysed form:
/// constant eta, uniform averaging, exact or Newton-Schulz polar factor, and
/// no warmup, rescaling, row normalization or decay.
StepInfo sf_spectral_momentum_step(ParamState& s, const Matrix& grad_at_y,
                                   const Hyperparams& hp);

/// Schedule-free NorMuon: momentum, polar factor, row-wise second-moment
/// normalization, RMS-matched step size and decay at the fast iterate.
StepInfo sf_normuon_step(ParamState& s, const Matrix& grad_at_y, const Hyperparams& hp);

/// Single-sequence AdamW or NorMuon under warmup + cosine decay.
StepInfo scheduled_baseline_step(ParamState& s, const Matrix& grad, const Hyperparams& hp);

/// Dispatches on s.kind.
StepInfo optimizer_step(ParamState& s, const Matrix& grad, const Hyperparams& hp);

/// Moves `live` between Y (train) and X (eval). Rejects beta1 == 0 for
/// schedule-free states. No-op if already in `mode`.
void set_mode(ParamState& s, Mode mode, double beta1);

/// Persistent reals per m x n matrix parameter, live weights included.
std::int64_t state_size(OptimizerKind kind, std::int64_t m, std::int64_t n);

/// Optimizer over a list of parameter blocks. Vector-shaped blocks of spectral
/// schedule-free runs are routed to SF-AdamW (with vector betas); those of
/// scheduled NorMuon to cosine AdamW.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, Hyperparams hp, const std::vector<Matrix>& initial,
            const std::vector<bool>& is_matrix);

  /// Applies one update; gradients must be evaluated at live() in train mode.
  std::vector<StepInfo> step(const std::vector<Matrix>& grads);

  void set_mode(Mode mode);
  Mode mode() const { return mode_; }

  std::vector<Matrix> live() const;
  std::vector<Matrix> x() const;
  /// Fast iterates; the live weights for scheduled kinds.
  std::vector<Matrix> z() const;

  OptimizerKind kind() const { return kind_; }
  const std::vector<ParamState>& states() const { return states_; }
  std::vector<ParamState>& states() { return states_; }
  const Hyperparams& block_hyperparams(std::size_t i) const { return block_hp_[i]; }
  const Hyperparams& hyperparams() const { return hp_; }

 private:
  OptimizerKind kind_;
  Hyperparams hp_;
  std::vector<Hyperparams> block_hp_;
  std::vector<ParamState> states_;
  Mode mode_ = Mode::train;
};

}  // namespace sfspec

#include "sfspec/optimizers.hpp"

#include <cmath>
#include <stdexcept>

#include "sfspec/errors.hpp"
#include "sfspec/linalg.hpp"
#include "sfspec/theory.hpp"

namespace sfspec {

namespace {

template <typename E>
struct NamedEnum {
  E value;
  std::string_view name;
};

constexpr NamedEnum<OptimizerKind> kKinds[] = {
    {OptimizerKind::sf_sgd, "sf_sgd"},
    {OptimizerKind::sf_adamw, "sf_adamw"},
    {OptimizerKind::sf_spectral_momentum, "sf_spectral_momentum"},
    {OptimizerKind::sf_normuon, "sf_normuon"},
    {OptimizerKind::adamw_cosine, "adamw_cosine"},
    {OptimizerKind::normuon_cosine, "normuon_cosine"},
};
constexpr NamedEnum<DecayPlacement> kDecays[] = {
    {DecayPlacement::none, "none"}, {DecayPlacement::at_y, "at_y"}, {DecayPlacement::at_z, "at_z"}};
constexpr NamedEnum<AveragingMode> kAveraging[] = {{AveragingMode::uniform, "uniform"},
                                                   {AveragingMode::lr_squared, "lr_squared"}};
constexpr NamedEnum<RmsDim> kRmsDims[] = {{RmsDim::product, "product"},
                                          {RmsDim::max_side, "max_side"}};
constexpr NamedEnum<MomentumInit> kMomInits[] = {{MomentumInit::first_gradient, "first_gradient"},
                                                 {MomentumInit::zero, "zero"}};
constexpr NamedEnum<PolarBackend> kBackends[] = {{PolarBackend::exact, "exact"},
                                                 {PolarBackend::newton_schulz, "newton_schulz"}};

template <typename E, std::size_t N>
std::string_view name_of(const NamedEnum<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "unknown";
}

template <typename E, std::size_t N>
E parse_named(const NamedEnum<E> (&table)[N], std::string_view s, const char* what) {
  for (const auto& e : table)
    if (e.name == s) return e.value;
  throw ConfigError(std::string("unknown ") + what + ": '" + std::string(s) + "'");
}

void require_train(const ParamState& s) {
  if (s.mode != Mode::train) throw std::logic_error("optimizer step requires train mode");
}

void require_finite_grad(const ParamState& s, const Matrix& g) {
  require_same_shape(s.live, g, "gradient");
  if (!g.all_finite()) throw DivergenceError("non-finite gradient", s.step + 1);
}

void require_finite_state(const ParamState& s) {
  if (!s.live.all_finite() || (!s.z.empty() && !s.z.all_finite())) {
    throw DivergenceError("non-finite parameter after update", s.step);
  }
}

double decay_rate(const Hyperparams& hp, double eta_t) {
  return hp.decay_uses_warmup ? eta_t : hp.eta;
}

// Applies decoupled decay to z according to the placement; y is the current
// gradient point.
void apply_sf_decay(Matrix& z, const Matrix& y, const Hyperparams& hp, double rate) {
  if (hp.lambda == 0.0) return;
  switch (hp.decay) {
    case DecayPlacement::none:
      break;
    case DecayPlacement::at_z:
      z *= (1.0 - rate * hp.lambda);
      break;
    case DecayPlacement::at_y:
      z.axpy(-rate * hp.lambda, y);
      break;
  }
}

double averaging_coefficient(ParamState& s, AveragingMode mode, double eta_t, std::int64_t t) {
  if (mode == AveragingMode::uniform) {
    s.avg.t += 1;
    return uniform_weight(t);
  }
  auto [next, c] = averaging_weight(s.avg, eta_t);
  s.avg = next;
  return c;
}

// Shared tail of every schedule-free update: average X toward the new Z and
// place Y in `live`.
void finish_sf_update(ParamState& s, Matrix x_t, double c, double beta1) {
  Matrix x_next = sf_average_x(x_t, s.z, c);
  s.live = sf_interpolate_y(x_next, s.z, beta1);
  if (s.x) s.x = std::move(x_next);
  s.step += 1;
  require_finite_state(s);
}

void update_momentum(ParamState& s, const Matrix& g, double mu, MomentumInit init) {
  if (s.step == 0 && init == MomentumInit::first_gradient) {
    s.mom = g;
    return;
  }
  s.mom = lincomb(mu, s.mom, 1.0 - mu, g);
}

// NorMuon direction from the current momentum: polar factor, optionally
// normalized per row by the running RMS of its row entries.
Matrix normuon_direction(ParamState& s, const Hyperparams& hp) {
  Matrix p = polar(s.mom, hp.polar_backend, hp.polar);
  if (!hp.row_normalization) return p;
  const std::size_t m = p.rows();
  const std::size_t n = p.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double ms = 0.0;
    for (double x : p.row(i)) ms += x * x;
    ms /= static_cast<double>(n);
    s.v(i, 0) = hp.beta2 * s.v(i, 0) + (1.0 - hp.beta2) * ms;
    const double denom = std::sqrt(s.v(i, 0)) + hp.eps;
    for (double& x : p.row(i)) x /= denom;
  }
  return p;
}

double rms_dim(const Matrix& p, RmsDim mode) {
  const double m = static_cast<double>(p.rows());
  const double n = static_cast<double>(p.cols());
  return mode == RmsDim::product ? std::sqrt(m * n) : std::sqrt(std::max(m, n));
}

double alignment(const Matrix& dir, const Matrix& z) {
  return diagnostics(z, dir).alpha;
}

}  // namespace

std::string_view to_string(OptimizerKind k) { return name_of(kKinds, k); }
std::string_view to_string(DecayPlacement d) { return name_of(kDecays, d); }
std::string_view to_string(Mode m) { return m == Mode::train ? "train" : "eval"; }
std::string_view to_string(AveragingMode a) { return name_of(kAveraging, a); }
std::string_view to_string(RmsDim r) { return name_of(kRmsDims, r); }
std::string_view to_string(MomentumInit m) { return name_of(kMomInits, m); }
std::string_view to_string(PolarBackend b) { return name_of(kBackends, b); }
OptimizerKind parse_optimizer_kind(std::string_view s) { return parse_named(kKinds, s, "optimizer"); }
DecayPlacement parse_decay(std::string_view s) { return parse_named(kDecays, s, "decay placement"); }
AveragingMode parse_averaging(std::string_view s) { return parse_named(kAveraging, s, "averaging mode"); }
RmsDim parse_rms_dim(std::string_view s) { return parse_named(kRmsDims, s, "rms_dim"); }
MomentumInit parse_momentum_init(std::string_view s) {
  return parse_named(kMomInits, s, "momentum_init");
}
PolarBackend parse_polar_backend(std::string_view s) {
  return parse_named(kBackends, s, "polar backend");
}

bool is_schedule_free(OptimizerKind k) {
  return k != OptimizerKind::adamw_cosine && k != OptimizerKind::normuon_cosine;
}

bool is_spectral(OptimizerKind k) {
  return k == OptimizerKind::sf_spectral_momentum || k == OptimizerKind::sf_normuon ||
         k == OptimizerKind::normuon_cosine;
}

Hyperparams Hyperparams::defaults_for(OptimizerKind kind) {
  Hyperparams hp;
  switch (kind) {
    case OptimizerKind::sf_normuon:
      break;
    case OptimizerKind::sf_adamw:
      hp.beta1 = 0.95;
      hp.beta2 = 0.99;
      hp.decay = DecayPlacement::at_y;
      break;
    case OptimizerKind::sf_sgd:
      hp.eta = 0.1;
      hp.lambda = 0.0;
      hp.decay = DecayPlacement::none;
      hp.warmup_steps = 1;
      hp.averaging = AveragingMode::uniform;
      break;
    case OptimizerKind::sf_spectral_momentum:
      hp.eta = 0.01;
      hp.lambda = 0.0;
      hp.decay = DecayPlacement::none;
      hp.warmup_steps = 1;
      hp.averaging = AveragingMode::uniform;
      break;
    case OptimizerKind::adamw_cosine:
      hp.eta = 0.004;
      hp.beta1 = 0.9;
      hp.beta2 = 0.95;
      hp.lambda = 0.1;
      hp.warmup_steps = 2500;
      hp.decay = DecayPlacement::at_y;
      break;
    case OptimizerKind::normuon_cosine:
      hp.mu = 0.95;
      hp.lambda = 0.1;
      hp.warmup_steps = 2500;
      hp.decay = DecayPlacement::at_y;
      hp.momentum_init = MomentumInit::zero;
      break;
  }
  return hp;
}

void Hyperparams::validate(OptimizerKind kind) const {
  auto fail = [](const std::string& msg) { throw ConfigError("hyperparams: " + msg); };
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must be in [0, 1)");
  if (!(mu >= 0.0 && mu < 1.0)) fail("mu must be in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (warmup_steps < 1) fail("warmup_steps must be >= 1");
  if (!(rms_scale > 0.0)) fail("rms_scale must be > 0");
  if (!(vector_beta1 >= 0.0 && vector_beta1 < 1.0)) fail("vector_beta1 must be in [0, 1)");
  if (!(vector_beta2 >= 0.0 && vector_beta2 < 1.0)) fail("vector_beta2 must be in [0, 1)");
  if (!is_schedule_free(kind) && total_steps < 1) fail("cosine baselines need total_steps >= 1");
  polar.validate();
}

ParamState init_state(OptimizerKind kind, const Matrix& w0, const Hyperparams& hp) {
  if (!w0.all_finite()) throw std::invalid_argument("initial weights must be finite");
  ParamState s;
  s.kind = kind;
  s.live = w0;
  const std::size_t m = w0.rows();
  const std::size_t n = w0.cols();
  switch (kind) {
    case OptimizerKind::sf_sgd:
      break;
    case OptimizerKind::sf_adamw:
      s.v = Matrix(m, n);
      break;
    case OptimizerKind::sf_spectral_momentum:
      s.mom = Matrix(m, n);
      break;
    case OptimizerKind::sf_normuon:
      s.mom = Matrix(m, n);
      s.v = Matrix(m, 1);
      break;
    case OptimizerKind::adamw_cosine:
      s.mom = Matrix(m, n);
      s.v = Matrix(m, n);
      break;
    case OptimizerKind::normuon_cosine:
      s.mom = Matrix(m, n);
      s.v = Matrix(m, 1);
      break;
  }
  if (is_schedule_free(kind)) {
    s.z = w0;  // X_1 = Z_1 = Y_1
    if (hp.beta1 == 0.0) s.x = w0;
  }
  return s;
}

Matrix sf_interpolate_y(const Matrix& x, const Matrix& z, double beta) {
  return lincomb(beta, x, 1.0 - beta, z);
}

Matrix sf_average_x(const Matrix& x, const Matrix& z_next, double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("averaging weight must be in [0, 1]");
  return lincomb(1.0 - c, x, c, z_next);
}

Matrix current_x(const ParamState& s, double beta1) {
  if (!is_schedule_free(s.kind) || s.mode == Mode::eval) return s.live;
  if (s.x) return *s.x;
  if (beta1 == 0.0) throw std::logic_error("X is not recoverable from Y and Z when beta1 == 0");
  Matrix x = lincomb(1.0, s.live, -(1.0 - beta1), s.z);
  x *= 1.0 / beta1;
  return x;
}

StepInfo sf_sgd_step(ParamState& s, const Matrix& grad_at_y, const Hyperparams& hp) {
  require_train(s);
  require_finite_grad(s, grad_at_y);
  const std::int64_t t = s.step + 1;
  StepInfo info;
  info.eta_t = warmup_lr(t, hp.eta, hp.warmup_steps);
  info.decay_rate = decay_rate(hp, info.eta_t);
  info.z_norm_before = frobenius_norm(s.z);
  info.alpha = alignment(grad_at_y, s.z);
  info.update_norm = info.eta_t * frobenius_norm(grad_at_y);

  Matrix x_t = current_x(s, hp.beta1);
  apply_sf_decay(s.z, s.live, hp, info.decay_rate);
  s.z.axpy(-info.eta_t, grad_at_y);
  info.c = averaging_coefficient(s, hp.averaging, info.eta_t, t);
  finish_sf_update(s, std::move(x_t), info.c, hp.beta1);
  info.z_norm_after = frobenius_norm(s.z);
  return info;
}

StepInfo sf_adamw_step(ParamState& s, const Matrix& grad_at_y, const Hyperparams& hp) {
  require_train(s);
  require_finite_grad(s, grad_at_y);
  const std::int64_t t = s.step + 1;
  StepInfo info;

  auto v = s.v.data();
  auto g = grad_at_y.data();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
  Matrix dir = grad_at_y;
  auto d = dir.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] /= std::sqrt(v[k]) + hp.eps;

  info.eta_t = adam_bias_lr(t, warmup_lr(t, hp.eta, hp.warmup_steps), hp.beta2);
  info.decay_rate = decay_rate(hp, info.eta_t);
  info.z_norm_before = frobenius_norm(s.z);
  info.alpha = alignment(dir, s.z);
  info.update_norm = info.eta_t * frobenius_norm(dir);

  Matrix x_t = current_x(s, hp.beta1);
  apply_sf_decay(s.z, s.live, hp, info.decay_rate);
  s.z.axpy(-info.eta_t, dir);
  info.c = averaging_coefficient(s, hp.averaging, info.eta_t, t);
  finish_sf_update(s, std::move(x_t), info.c, hp.beta1);
  info.z_norm_after = frobenius_norm(s.z);
  return info;
}

StepInfo sf_spectral_momentum_step(ParamState& s, const Matrix& grad_at_y,
                                   const Hyperparams& hp) {
  require_train(s);
  require_finite_grad(s, grad_at_y);
  const std::int64_t t = s.step + 1;
  StepInfo info;
  info.eta_t = hp.eta;

  update_momentum(s, grad_at_y, hp.mu, MomentumInit::first_gradient);
  const Matrix p = polar(s.mom, hp.polar_backend, hp.polar);
  info.z_norm_before = frobenius_norm(s.z);
  info.alpha = alignment(p, s.z);
  info.update_norm = hp.eta * frobenius_norm(p);

  Matrix x_t = current_x(s, hp.beta1);
  s.z.axpy(-hp.eta, p);
  info.c = averaging_coefficient(s, AveragingMode::uniform, hp.eta, t);
  finish_sf_update(s, std::move(x_t), info.c, hp.beta1);
  info.z_norm_after = frobenius_norm(s.z);
  return info;
}

StepInfo sf_normuon_step(ParamState& s, const Matrix& grad_at_y, const Hyperparams& hp) {
  require_train(s);
  require_finite_grad(s, grad_at_y);
  const std::int64_t t = s.step + 1;
  StepInfo info;

  update_momentum(s, grad_at_y, hp.mu, hp.momentum_init);
  const Matrix p_hat = normuon_direction(s, hp);
  info.eta_t = warmup_lr(t, hp.eta, hp.warmup_steps);
  const double p_norm = frobenius_norm(p_hat);
  const double eta_hat = p_norm > 0.0 ? hp.rms_scale * info.eta_t * rms_dim(p_hat, hp.rms_dim) / p_norm : 0.0;
  info.decay_rate = decay_rate(hp, info.eta_t);
  info.z_norm_before = frobenius_norm(s.z);
  info.alpha = alignment(p_hat, s.z);
  info.update_norm = eta_hat * p_norm;

  Matrix x_t = current_x(s, hp.beta1);
  apply_sf_decay(s.z, s.live, hp, info.decay_rate);
  if (eta_hat != 0.0) s.z.axpy(-eta_hat, p_hat);
  info.c = averaging_coefficient(s, hp.averaging, info.eta_t, t);
  finish_sf_update(s, std::move(x_t), info.c, hp.beta1);
  info.z_norm_after = frobenius_norm(s.z);
  return info;
}

StepInfo scheduled_baseline_step(ParamState& s, const Matrix& grad, const Hyperparams& hp) {
  require_train(s);
  require_finite_grad(s, grad);
  if (is_schedule_free(s.kind)) throw std::logic_error("scheduled step on a schedule-free state");
  const std::int64_t t = s.step + 1;
  StepInfo info;
  info.eta_t = cosine_lr(t, hp.total_steps, warmup_lr(t, hp.eta, hp.warmup_steps));
  info.decay_rate = info.eta_t;
  info.z_norm_before = frobenius_norm(s.live);

  Matrix dir;
  double step_size = 0.0;
  if (s.kind == OptimizerKind::adamw_cosine) {
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    s.mom = lincomb(hp.beta1, s.mom, 1.0 - hp.beta1, grad);
    auto v = s.v.data();
    auto g = grad.data();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
    dir = s.mom;
    auto d = dir.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (d[k] / bc1) / (std::sqrt(v[k] / bc2) + hp.eps);
    step_size = info.eta_t;
  } else {
    update_momentum(s, grad, hp.mu, hp.momentum_init);
    dir = normuon_direction(s, hp);
    const double p_norm = frobenius_norm(dir);
    step_size = p_norm > 0.0 ? hp.rms_scale * info.eta_t * rms_dim(dir, hp.rms_dim) / p_norm : 0.0;
  }
  info.alpha = alignment(dir, s.live);
  info.update_norm = step_size * frobenius_norm(dir);
  if (hp.lambda != 0.0 && hp.decay != DecayPlacement::none) s.live *= (1.0 - info.eta_t * hp.lambda);
  if (step_size != 0.0) s.live.axpy(-step_size, dir);
  info.c = 1.0;
  s.step += 1;
  require_finite_state(s);
  info.z_norm_after = frobenius_norm(s.live);
  return info;
}

StepInfo optimizer_step(ParamState& s, const Matrix& grad, const Hyperparams& hp) {
  switch (s.kind) {
    case OptimizerKind::sf_sgd:
      return sf_sgd_step(s, grad, hp);
    case OptimizerKind::sf_adamw:
      return sf_adamw_step(s, grad, hp);
    case OptimizerKind::sf_spectral_momentum:
      return sf_spectral_momentum_step(s, grad, hp);
    case OptimizerKind::sf_normuon:
      return sf_normuon_step(s, grad, hp);
    case OptimizerKind::adamw_cosine:
    case OptimizerKind::normuon_cosine:
      return scheduled_baseline_step(s, grad, hp);
  }
  throw std::logic_error("unreachable optimizer kind");
}

void set_mode(ParamState& s, Mode mode, double beta1) {
  if (s.mode == mode) return;
  if (!is_schedule_free(s.kind)) {
    s.mode = mode;
    return;
  }
  if (beta1 == 0.0) throw std::invalid_argument("mode switching is undefined for beta1 == 0");
  if (mode == Mode::eval) {
    Matrix x = lincomb(1.0, s.live, -(1.0 - beta1), s.z);
    x *= 1.0 / beta1;
    s.live = std::move(x);
  } else {
    s.live = sf_interpolate_y(s.live, s.z, beta1);
  }
  s.mode = mode;
}

std::int64_t state_size(OptimizerKind kind, std::int64_t m, std::int64_t n) {
  if (m < 1 || n < 1) throw std::invalid_argument("state_size: dimensions must be positive");
  const std::int64_t mn = m * n;
  switch (kind) {
    case OptimizerKind::sf_sgd:
      return 2 * mn;  // Y, Z
    case OptimizerKind::sf_adamw:
      return 3 * mn;  // Y, Z, v
    case OptimizerKind::sf_spectral_momentum:
      return 3 * mn;  // Y, Z, M
    case OptimizerKind::sf_normuon:
      return 3 * mn + m;  // Y, Z, M, row v
    case OptimizerKind::adamw_cosine:
      return 3 * mn;  // W, m, v
    case OptimizerKind::normuon_cosine:
      return 2 * mn + m;  // W, M, row v
  }
  throw std::logic_error("unreachable optimizer kind");
}

Optimizer::Optimizer(OptimizerKind kind, Hyperparams hp, const std::vector<Matrix>& initial,
                     const std::vector<bool>& is_matrix)
    : kind_(kind), hp_(std::move(hp)) {
  if (initial.size() != is_matrix.size()) {
    throw std::invalid_argument("Optimizer: block flags do not match parameter count");
  }
  hp_.validate(kind_);
  for (std::size_t i = 0; i < initial.size(); ++i) {
    OptimizerKind block_kind = kind_;
    Hyperparams block_hp = hp_;
    if (!is_matrix[i] && is_spectral(kind_)) {
      if (is_schedule_free(kind_)) {
        block_kind = OptimizerKind::sf_adamw;
        block_hp.beta1 = hp_.vector_beta1;
        block_hp.beta2 = hp_.vector_beta2;
      } else {
        block_kind = OptimizerKind::adamw_cosine;
      }
    }
    states_.push_back(init_state(block_kind, initial[i], block_hp));
    block_hp_.push_back(std::move(block_hp));
  }
}

std::vector<StepInfo> Optimizer::step(const std::vector<Matrix>& grads) {
  if (grads.size() != states_.size()) throw std::invalid_argument("gradient count mismatch");
  if (mode_ != Mode::train) throw std::logic_error("optimizer step requires train mode");
  std::vector<StepInfo> infos;
  infos.reserve(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    infos.push_back(optimizer_step(states_[i], grads[i], block_hp_[i]));
  }
  return infos;
}

void Optimizer::set_mode(Mode mode) {
  for (std::size_t i = 0; i < states_.size(); ++i) sfspec::set_mode(states_[i], mode, block_hp_[i].beta1);
  mode_ = mode;
}

std::vector<Matrix> Optimizer::live() const {
  std::vector<Matrix> out;
  for (const auto& s : states_) out.push_back(s.live);
  return out;
}

std::vector<Matrix> Optimizer::x() const {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < states_.size(); ++i) out.push_back(current_x(states_[i], block_hp_[i].beta1));
  return out;
}

std::vector<Matrix> Optimizer::z() const {
  std::vector<Matrix> out;
  for (const auto& s : states_) out.push_back(s.z.empty() ? s.live : s.z);
  return out;
}

}  // namespace sfspec

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfspec/optimizers.hpp"
#include "sfspec/problems.hpp"

namespace sfspec {

/// Problem selection. Fields not used by `kind` are ignored but still
/// recorded in the resolved config.
struct ProblemSpec {
  std::string kind = "quadratic";  ///< quadratic | regression | mlp
  std::size_t m = 16;
  std::size_t n = 16;
  double condition = 10.0;
  double init_scale = 1.0;
  std::size_t n_samples = 256;
  double noise_level = 0.1;
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 32;
  std::size_t classes = 4;
  /// Data seed; defaults to the run seed.
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  OptimizerKind optimizer = OptimizerKind::sf_normuon;
  Hyperparams hp = Hyperparams::defaults_for(OptimizerKind::sf_normuon);
  ProblemSpec problem;
  std::int64_t steps = 1000;
  std::uint64_t seed = 0;
  /// Gradient-noise stream; defaults to a stream derived from `seed`.
  std::optional<std::uint64_t> noise_seed;
  double sigma = 0.0;
  std::int64_t batch = 1;
  bool no_momentum = false;
  bool no_row_norm = false;
  std::int64_t log_every = 1;
  /// Parameter block whose Z feeds rho, alpha and the steady-state columns.
  std::size_t track_block = 0;

  void validate() const;
};

/// Parses a JSON run config. Omitted hyperparameters take the defaults of the
/// chosen optimizer; unknown keys and bad values throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);

/// Every field actually used, as JSON.
std::string resolved_config_json(const RunConfig& cfg);

ProblemPtr make_problem(const RunConfig& cfg);

/// Hyperparameters after applying the ablation switches.
Hyperparams effective_hyperparams(const RunConfig& cfg);

/// One trajectory row. Losses and grad_nuclear are measured at the iterates
/// entering step `step`; rho and alpha refer to Z_t before the update, z_frob
/// and qss_ratio to the update's result.
struct StepRecord {
  std::int64_t step = 0;
  double eta_t = 0.0;
  double c_t = 0.0;
  double loss_x = 0.0;
  double loss_y = 0.0;
  double loss_z = 0.0;
  double grad_nuclear = 0.0;  ///< sum over blocks of ||grad f(Y_t)||_*
  double z_frob = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  double rho_pred = 0.0;  ///< steady_state_rms(alpha, eta_t, lambda); 0 when lambda = 0
  double qss_ratio = 0.0;
};

inline constexpr const char* kTrajectorySchemaVersion = "1";
inline constexpr const char* kTrajectoryHeader =
    "step,eta_t,c_t,loss_x,loss_y,loss_z,grad_nuclear,z_frob,rho,alpha,rho_pred,qss_ratio";

void write_trajectory_csv(std::ostream& os, const std::vector<StepRecord>& records);

struct RunSummary {
  bool diverged = false;
  std::int64_t diverged_step = 0;
  std::string divergence_reason;
  std::int64_t steps_completed = 0;
  double final_loss_x = 0.0;
  double final_loss_y = 0.0;
  double final_loss_z = 0.0;
  double final_z_frob = 0.0;
  double mean_grad_nuclear = 0.0;  ///< over logged steps
  /// Norm-cap checks; absent unless the run is SF-NorMuon with decay at Z.
  std::optional<std::int64_t> cap_violations;
  std::int64_t cap_checks = 0;
  double max_post_warmup_qss = 0.0;
  /// Mean |rho - rho_pred| / rho_pred over the last quarter of steps.
  std::optional<double> steady_state_rel_error;
  double mean_rho_last_quarter = 0.0;
  double mean_alpha_last_quarter = 0.0;
};

std::string summary_json(const RunSummary& s);

struct RunResult {
  std::vector<StepRecord> records;
  RunSummary summary;
};

/// Per-step hook: step index t, the optimizer after the update, and the step
/// telemetry of every block.
using StepObserver =
    std::function<void(std::int64_t, const Optimizer&, const std::vector<StepInfo>&)>;

/// Runs to completion or divergence; never throws DivergenceError.
RunResult run(const RunConfig& cfg, const StepObserver& observer = {});

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitVerify = 4;

/// Runs and writes trajectory.csv, summary.json and config.resolved.json into
/// `out_dir`. Returns kExitOk or kExitDivergence.
int run_to_dir(const RunConfig& cfg, const std::string& out_dir);

struct SweepRow {
  std::size_t index = 0;
  std::vector<std::string> values;  ///< grid values as JSON text, in axis order
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct SweepResult {
  std::vector<std::string> axes;
  std::vector<SweepRow> rows;
};

/// Cartesian product over a grid given as a JSON object of dotted config
/// paths to value lists (the last axis varies fastest). Unless the grid sets
/// "seed", run i uses a seed derived from (base seed, i). With a non-empty
/// `out_dir`, each run writes into out_dir/run_<i> and the table goes to
/// out_dir/sweep.csv.
SweepResult sweep(const std::string& base_config_json, const std::string& grid_json,
                  const std::string& out_dir, int jobs = 1);

void write_sweep_csv(std::ostream& os, const SweepResult& r);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Evaluates a theory calculator on named JSON inputs and returns JSON.
/// calc: stationarity_bound | tuned_hyperparams | z_norm_cap | steady_state_rms |
/// decay_at_y_growth | state_size.
std::string predict(const std::string& calc, const std::string& inputs_json);

}  // namespace sfspec

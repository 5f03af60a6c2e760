#include "sfspec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sfspec/errors.hpp"
#include "sfspec/linalg.hpp"
#include "sfspec/theory.hpp"

namespace sfspec {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::string read_string(const json& obj, const char* key, const std::string& fallback) {
  std::string s = fallback;
  read(obj, key, s);
  return s;
}

void parse_hyperparams(const json& j, Hyperparams& hp) {
  check_keys(j,
             {"eta", "beta1", "beta2", "mu", "eps", "lambda", "warmup_steps", "rms_scale", "decay",
              "averaging", "decay_uses_warmup", "rms_dim", "momentum_init", "row_normalization",
              "total_steps", "vector_beta1", "vector_beta2", "polar"},
             "hyperparams");
  read(j, "eta", hp.eta);
  read(j, "beta1", hp.beta1);
  read(j, "beta2", hp.beta2);
  read(j, "mu", hp.mu);
  read(j, "eps", hp.eps);
  read(j, "lambda", hp.lambda);
  read(j, "warmup_steps", hp.warmup_steps);
  read(j, "rms_scale", hp.rms_scale);
  read(j, "decay_uses_warmup", hp.decay_uses_warmup);
  read(j, "row_normalization", hp.row_normalization);
  read(j, "total_steps", hp.total_steps);
  read(j, "vector_beta1", hp.vector_beta1);
  read(j, "vector_beta2", hp.vector_beta2);
  if (j.contains("decay")) hp.decay = parse_decay(read_string(j, "decay", ""));
  if (j.contains("averaging")) hp.averaging = parse_averaging(read_string(j, "averaging", ""));
  if (j.contains("rms_dim")) hp.rms_dim = parse_rms_dim(read_string(j, "rms_dim", ""));
  if (j.contains("momentum_init")) {
    hp.momentum_init = parse_momentum_init(read_string(j, "momentum_init", ""));
  }
  if (j.contains("polar")) {
    const json& p = j.at("polar");
    check_keys(p, {"steps", "eps", "a", "b", "c", "reduced_precision"}, "hyperparams.polar");
    read(p, "steps", hp.polar.steps);
    read(p, "eps", hp.polar.eps);
    read(p, "a", hp.polar.a);
    read(p, "b", hp.polar.b);
    read(p, "c", hp.polar.c);
    read(p, "reduced_precision", hp.polar.reduced_precision);
  }
}

void parse_problem(const json& j, ProblemSpec& p) {
  check_keys(j,
             {"kind", "m", "n", "condition", "init_scale", "n_samples", "noise_level", "input_dim",
              "hidden_dim", "classes", "seed"},
             "problem");
  read(j, "kind", p.kind);
  if (p.kind != "quadratic" && p.kind != "regression" && p.kind != "mlp") {
    throw ConfigError("unknown problem kind: '" + p.kind + "'");
  }
  read(j, "m", p.m);
  read(j, "n", p.n);
  read(j, "condition", p.condition);
  read(j, "init_scale", p.init_scale);
  read(j, "n_samples", p.n_samples);
  read(j, "noise_level", p.noise_level);
  read(j, "input_dim", p.input_dim);
  read(j, "hidden_dim", p.hidden_dim);
  read(j, "classes", p.classes);
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read(j, "seed", s);
    p.seed = s;
  }
}

ordered_json hyperparams_json(const Hyperparams& hp) {
  ordered_json j;
  j["eta"] = hp.eta;
  j["beta1"] = hp.beta1;
  j["beta2"] = hp.beta2;
  j["mu"] = hp.mu;
  j["eps"] = hp.eps;
  j["lambda"] = hp.lambda;
  j["warmup_steps"] = hp.warmup_steps;
  j["rms_scale"] = hp.rms_scale;
  j["decay"] = std::string(to_string(hp.decay));
  j["averaging"] = std::string(to_string(hp.averaging));
  j["decay_uses_warmup"] = hp.decay_uses_warmup;
  j["rms_dim"] = std::string(to_string(hp.rms_dim));
  j["momentum_init"] = std::string(to_string(hp.momentum_init));
  j["row_normalization"] = hp.row_normalization;
  j["total_steps"] = hp.total_steps;
  j["vector_beta1"] = hp.vector_beta1;
  j["vector_beta2"] = hp.vector_beta2;
  j["polar"] = ordered_json{{"steps", hp.polar.steps},
                            {"eps", hp.polar.eps},
                            {"a", hp.polar.a},
                            {"b", hp.polar.b},
                            {"c", hp.polar.c},
                            {"reduced_precision", hp.polar.reduced_precision}};
  return j;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double nuclear_sum(const Params& g) {
  double acc = 0.0;
  for (const Matrix& m : g) acc += nuclear_norm(m);
  return acc;
}

// Norm-cap reference point: the first step at which eta_t has reached eta.
struct CapTracker {
  bool active = false;
  std::int64_t t0 = 1;
  double eta = 0.0;
  double lambda = 0.0;
  std::vector<std::optional<double>> z_ref;
  std::int64_t checks = 0;
  std::int64_t violations = 0;

  void observe(std::int64_t t, const Optimizer& opt, const std::vector<StepInfo>& infos) {
    if (!active || t < t0) return;
    for (std::size_t b = 0; b < infos.size(); ++b) {
      const ParamState& s = opt.states()[b];
      if (s.kind != OptimizerKind::sf_normuon) continue;
      if (!z_ref[b]) z_ref[b] = infos[b].z_norm_before;
      const auto m = static_cast<std::int64_t>(s.z.rows());
      const auto n = static_cast<std::int64_t>(s.z.cols());
      const double cap = z_norm_cap(*z_ref[b], t + 1 - t0, eta, lambda, m, n);
      ++checks;
      if (infos[b].z_norm_after > cap * (1.0 + 1e-12)) ++violations;
    }
  }
};

}  // namespace

void RunConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
  if (problem.m == 0 || problem.n == 0) throw ConfigError("problem dimensions must be positive");
  if (!(problem.condition >= 1.0)) throw ConfigError("problem.condition must be >= 1");
  effective_hyperparams(*this).validate(optimizer);
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"optimizer", "hyperparams", "problem", "steps", "seed", "noise_seed", "sigma", "batch",
              "polar_backend", "ablations", "log_every", "track_block", "csv_schema_version"},
             "config");
  // Accepted so a config.resolved.json can be fed back in.
  if (j.contains("csv_schema_version") && read_string(j, "csv_schema_version", "") != kTrajectorySchemaVersion) {
    throw ConfigError("unsupported csv_schema_version");
  }
  RunConfig cfg;
  if (!j.contains("optimizer")) throw ConfigError("config needs an 'optimizer'");
  cfg.optimizer = parse_optimizer_kind(read_string(j, "optimizer", ""));
  cfg.hp = Hyperparams::defaults_for(cfg.optimizer);
  read(j, "steps", cfg.steps);
  read(j, "seed", cfg.seed);
  if (j.contains("noise_seed") && !j.at("noise_seed").is_null()) {
    std::uint64_t ns = 0;
    read(j, "noise_seed", ns);
    cfg.noise_seed = ns;
  }
  read(j, "sigma", cfg.sigma);
  read(j, "batch", cfg.batch);
  read(j, "log_every", cfg.log_every);
  read(j, "track_block", cfg.track_block);
  if (j.contains("hyperparams")) parse_hyperparams(j.at("hyperparams"), cfg.hp);
  if (j.contains("problem")) parse_problem(j.at("problem"), cfg.problem);
  if (j.contains("polar_backend")) {
    cfg.hp.polar_backend = parse_polar_backend(read_string(j, "polar_backend", ""));
  }
  if (j.contains("ablations")) {
    const json& a = j.at("ablations");
    check_keys(a, {"no_momentum", "no_row_norm"}, "ablations");
    read(a, "no_momentum", cfg.no_momentum);
    read(a, "no_row_norm", cfg.no_row_norm);
  }
  if (!is_schedule_free(cfg.optimizer) && cfg.hp.total_steps == 0) cfg.hp.total_steps = cfg.steps;
  cfg.validate();
  return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
  ordered_json j;
  j["optimizer"] = std::string(to_string(cfg.optimizer));
  j["hyperparams"] = hyperparams_json(cfg.hp);
  ordered_json p;
  p["kind"] = cfg.problem.kind;
  p["m"] = cfg.problem.m;
  p["n"] = cfg.problem.n;
  p["condition"] = cfg.problem.condition;
  p["init_scale"] = cfg.problem.init_scale;
  p["n_samples"] = cfg.problem.n_samples;
  p["noise_level"] = cfg.problem.noise_level;
  p["input_dim"] = cfg.problem.input_dim;
  p["hidden_dim"] = cfg.problem.hidden_dim;
  p["classes"] = cfg.problem.classes;
  p["seed"] = cfg.problem.seed.value_or(cfg.seed);
  j["problem"] = p;
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["noise_seed"] = cfg.noise_seed ? ordered_json(*cfg.noise_seed) : ordered_json(nullptr);
  j["sigma"] = cfg.sigma;
  j["batch"] = cfg.batch;
  j["polar_backend"] = std::string(to_string(cfg.hp.polar_backend));
  j["ablations"] = ordered_json{{"no_momentum", cfg.no_momentum}, {"no_row_norm", cfg.no_row_norm}};
  j["log_every"] = cfg.log_every;
  j["track_block"] = cfg.track_block;
  j["csv_schema_version"] = kTrajectorySchemaVersion;
  return j.dump(2);
}

ProblemPtr make_problem(const RunConfig& cfg) {
  const ProblemSpec& p = cfg.problem;
  const std::uint64_t seed = p.seed.value_or(cfg.seed);
  if (p.kind == "quadratic") return quadratic_problem(p.m, p.n, p.condition, seed, p.init_scale);
  if (p.kind == "regression") return matrix_regression_problem(p.n_samples, p.m, p.n, p.noise_level, seed);
  if (p.kind == "mlp") return tiny_mlp_problem(p.input_dim, p.hidden_dim, p.classes, p.n_samples, seed);
  throw ConfigError("unknown problem kind: '" + p.kind + "'");
}

Hyperparams effective_hyperparams(const RunConfig& cfg) {
  Hyperparams hp = cfg.hp;
  if (cfg.no_momentum) hp.mu = 0.0;
  if (cfg.no_row_norm) hp.row_normalization = false;
  return hp;
}

void write_trajectory_csv(std::ostream& os, const std::vector<StepRecord>& records) {
  os << kTrajectoryHeader << '\n';
  for (const StepRecord& r : records) {
    os << r.step << ',' << fmt17(r.eta_t) << ',' << fmt17(r.c_t) << ',' << fmt17(r.loss_x) << ','
       << fmt17(r.loss_y) << ',' << fmt17(r.loss_z) << ',' << fmt17(r.grad_nuclear) << ','
       << fmt17(r.z_frob) << ',' << fmt17(r.rho) << ',' << fmt17(r.alpha) << ','
       << fmt17(r.rho_pred) << ',' << fmt17(r.qss_ratio) << '\n';
  }
}

std::string summary_json(const RunSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  ordered_json j;
  j["status"] = s.diverged ? "diverged" : "ok";
  j["diverged_step"] = s.diverged ? ordered_json(s.diverged_step) : ordered_json(nullptr);
  j["divergence_reason"] = s.divergence_reason;
  j["steps_completed"] = s.steps_completed;
  j["final_loss_x"] = num(s.final_loss_x);
  j["final_loss_y"] = num(s.final_loss_y);
  j["final_loss_z"] = num(s.final_loss_z);
  j["final_z_frob"] = num(s.final_z_frob);
  j["mean_grad_nuclear"] = num(s.mean_grad_nuclear);
  j["cap_violations"] = s.cap_violations ? ordered_json(*s.cap_violations) : ordered_json(nullptr);
  j["cap_checks"] = s.cap_checks;
  j["max_post_warmup_qss_ratio"] = num(s.max_post_warmup_qss);
  j["steady_state_rel_error_last_quarter"] =
      s.steady_state_rel_error ? num(*s.steady_state_rel_error) : ordered_json(nullptr);
  j["mean_rho_last_quarter"] = num(s.mean_rho_last_quarter);
  j["mean_alpha_last_quarter"] = num(s.mean_alpha_last_quarter);
  return j.dump(2);
}

RunResult run(const RunConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const ProblemPtr problem = make_problem(cfg);
  const auto blocks = problem->blocks();
  if (cfg.track_block >= blocks.size()) throw ConfigError("track_block out of range");
  std::vector<bool> is_matrix;
  for (const auto& b : blocks) is_matrix.push_back(b.is_matrix);

  const Hyperparams hp = effective_hyperparams(cfg);
  Optimizer opt(cfg.optimizer, hp, problem->initial_point(derive_seed(cfg.seed, 0)), is_matrix);
  NoiseOracle noise(cfg.sigma, cfg.batch, cfg.noise_seed.value_or(derive_seed(cfg.seed, 1)));

  const Hyperparams& track_hp = opt.block_hyperparams(cfg.track_block);
  const double track_mn = static_cast<double>(blocks[cfg.track_block].rows * blocks[cfg.track_block].cols);
  const std::int64_t quarter = std::max<std::int64_t>(1, cfg.steps / 4);
  const std::int64_t last_quarter_start = cfg.steps - quarter + 1;

  CapTracker cap;
  cap.active = cfg.optimizer == OptimizerKind::sf_normuon && hp.decay == DecayPlacement::at_z &&
               hp.lambda > 0.0 && hp.eta * hp.lambda < 1.0;
  cap.t0 = hp.warmup_steps;
  cap.eta = hp.eta;
  cap.lambda = hp.lambda;
  cap.z_ref.assign(blocks.size(), std::nullopt);

  RunResult result;
  RunSummary& sum = result.summary;
  double grad_nuclear_acc = 0.0;
  std::int64_t logged = 0;
  double rel_err_acc = 0.0, rho_acc = 0.0, alpha_acc = 0.0;
  std::int64_t rel_err_n = 0, quarter_n = 0;

  auto diverge = [&](std::int64_t t, const std::string& why) {
    sum.diverged = true;
    sum.diverged_step = t;
    sum.divergence_reason = why;
  };

  for (std::int64_t t = 1; t <= cfg.steps; ++t) {
    const Params y = opt.live();
    Params g = problem->grad(y);
    const bool log_now = t == 1 || t == cfg.steps || t % cfg.log_every == 0;
    StepRecord rec;
    if (log_now) {
      rec.step = t;
      rec.loss_y = problem->loss(y);
      rec.loss_x = problem->loss(opt.x());
      rec.loss_z = problem->loss(opt.z());
      if (!std::isfinite(rec.loss_y) || !std::isfinite(rec.loss_x) || !std::isfinite(rec.loss_z)) {
        diverge(t, "non-finite loss");
        break;
      }
      rec.grad_nuclear = nuclear_sum(g);
    }
    noise.perturb(g);

    std::vector<StepInfo> infos;
    try {
      infos = opt.step(g);
    } catch (const DivergenceError& e) {
      diverge(e.step(), e.what());
      break;
    }
    sum.steps_completed = t;
    const StepInfo& ti = infos[cfg.track_block];
    const double rho_t = ti.z_norm_before / std::sqrt(track_mn);
    const double rho_next = ti.z_norm_after / std::sqrt(track_mn);
    const double q = qss_ratio(rho_t, rho_next);
    const double rho_pred = track_hp.decay != DecayPlacement::none && track_hp.lambda > 0.0 && ti.eta_t > 0.0
                                ? steady_state_rms(ti.alpha, ti.eta_t, track_hp.lambda)
                                : 0.0;
    if (t > hp.warmup_steps) sum.max_post_warmup_qss = std::max(sum.max_post_warmup_qss, q);
    if (t >= last_quarter_start) {
      rho_acc += rho_t;
      alpha_acc += ti.alpha;
      ++quarter_n;
      if (rho_pred > 0.0) {
        rel_err_acc += std::abs(rho_t - rho_pred) / rho_pred;
        ++rel_err_n;
      }
    }
    cap.observe(t, opt, infos);

    if (log_now) {
      rec.eta_t = ti.eta_t;
      rec.c_t = ti.c;
      rec.z_frob = ti.z_norm_after;
      rec.rho = rho_t;
      rec.alpha = ti.alpha;
      rec.rho_pred = rho_pred;
      rec.qss_ratio = q;
      grad_nuclear_acc += rec.grad_nuclear;
      ++logged;
      result.records.push_back(rec);
    }
    if (observer) observer(t, opt, infos);
  }

  if (!sum.diverged) {
    sum.final_loss_y = problem->loss(opt.live());
    sum.final_loss_x = problem->loss(opt.x());
    sum.final_loss_z = problem->loss(opt.z());
    sum.final_z_frob = frobenius_norm(opt.z()[cfg.track_block]);
    if (!std::isfinite(sum.final_loss_x) || !std::isfinite(sum.final_loss_y) ||
        !std::isfinite(sum.final_loss_z)) {
      diverge(cfg.steps, "non-finite final loss");
    }
  }
  sum.mean_grad_nuclear = logged > 0 ? grad_nuclear_acc / static_cast<double>(logged) : 0.0;
  if (cap.active) sum.cap_violations = cap.violations;
  sum.cap_checks = cap.checks;
  if (rel_err_n > 0) sum.steady_state_rel_error = rel_err_acc / static_cast<double>(rel_err_n);
  if (quarter_n > 0) {
    sum.mean_rho_last_quarter = rho_acc / static_cast<double>(quarter_n);
    sum.mean_alpha_last_quarter = alpha_acc / static_cast<double>(quarter_n);
  }
  return result;
}

namespace {

void write_outputs(const RunConfig& cfg, const RunResult& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "config.resolved.json");
    f << resolved_config_json(cfg) << '\n';
  }
  {
    std::ofstream f(fs::path(out_dir) / "trajectory.csv");
    write_trajectory_csv(f, r.records);
  }
  {
    std::ofstream f(fs::path(out_dir) / "summary.json");
    f << summary_json(r.summary) << '\n';
  }
}

}  // namespace

int run_to_dir(const RunConfig& cfg, const std::string& out_dir) {
  const RunResult r = run(cfg);
  write_outputs(cfg, r, out_dir);
  return r.summary.diverged ? kExitDivergence : kExitOk;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SweepResult sweep(const std::string& base_config_json, const std::string& grid_json,
                  const std::string& out_dir, int jobs) {
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  ordered_json base, grid;
  try {
    base = ordered_json::parse(base_config_json);
    grid = ordered_json::parse(grid_json);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("sweep input is not valid JSON: ") + e.what());
  }
  if (!grid.is_object() || grid.empty()) throw ConfigError("grid must be a non-empty JSON object");

  SweepResult result;
  std::vector<std::vector<ordered_json>> values;
  for (const auto& [key, list] : grid.items()) {
    if (!list.is_array() || list.empty()) throw ConfigError("grid axis '" + key + "' needs a non-empty list");
    result.axes.push_back(key);
    values.emplace_back(list.begin(), list.end());
  }
  const bool grid_sets_seed = grid.contains("seed");
  const std::uint64_t base_seed = base.value("seed", std::uint64_t{0});

  std::size_t total = 1;
  for (const auto& v : values) total *= v.size();

  std::vector<RunConfig> configs;
  for (std::size_t idx = 0; idx < total; ++idx) {
    ordered_json cfg_json = base;
    SweepRow row;
    row.index = idx;
    std::size_t rem = idx;
    std::vector<std::size_t> pick(values.size());
    for (std::size_t a = values.size(); a-- > 0;) {
      pick[a] = rem % values[a].size();
      rem /= values[a].size();
    }
    for (std::size_t a = 0; a < values.size(); ++a) {
      const ordered_json& v = values[a][pick[a]];
      row.values.push_back(v.dump());
      ordered_json* node = &cfg_json;
      std::string path = result.axes[a];
      std::size_t dot;
      while ((dot = path.find('.')) != std::string::npos) {
        node = &(*node)[path.substr(0, dot)];
        path = path.substr(dot + 1);
      }
      (*node)[path] = v;
    }
    if (!grid_sets_seed) cfg_json["seed"] = derive_seed(base_seed, idx);
    configs.push_back(parse_run_config(cfg_json.dump()));
    row.seed = configs.back().seed;
    result.rows.push_back(std::move(row));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      RunResult r = run(configs[i]);
      if (!out_dir.empty()) {
        write_outputs(configs[i], r, (std::filesystem::path(out_dir) / ("run_" + std::to_string(i))).string());
      }
      result.rows[i].summary = std::move(r.summary);
    }
  };
  const int n_threads = std::min<int>(jobs, static_cast<int>(total));
  std::vector<std::thread> pool;
  for (int k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "sweep.csv");
    write_sweep_csv(f, result);
  }
  return result;
}

void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  auto csv_field = [](std::string s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"') out += '"';
      out += ch;
    }
    return out + "\"";
  };
  os << "index";
  for (const auto& a : r.axes) os << ',' << csv_field(a);
  os << ",seed,status,final_loss_x,final_loss_y,final_loss_z,mean_grad_nuclear\n";
  for (const auto& row : r.rows) {
    os << row.index;
    for (const auto& v : row.values) os << ',' << csv_field(v);
    os << ',' << row.seed << ',' << (row.summary.diverged ? "diverged" : "ok") << ','
       << fmt17(row.summary.final_loss_x) << ',' << fmt17(row.summary.final_loss_y) << ','
       << fmt17(row.summary.final_loss_z) << ',' << fmt17(row.summary.mean_grad_nuclear) << '\n';
  }
}

std::string predict(const std::string& calc, const std::string& inputs_json) {
  json in;
  try {
    in = json::parse(inputs_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("inputs are not valid JSON: ") + e.what());
  }
  auto theory_inputs = [&](bool with_mu_eta) {
    std::set<std::string> keys = {"Delta", "L", "D", "r", "sigma", "B", "beta", "T", "norm_mode"};
    if (with_mu_eta) keys.insert({"mu", "eta"});
    check_keys(in, keys, "inputs");
    TheoryInputs t;
    read(in, "Delta", t.delta);
    read(in, "L", t.smoothness);
    read(in, "D", t.diameter);
    read(in, "r", t.r);
    read(in, "sigma", t.sigma);
    read(in, "B", t.batch);
    read(in, "beta", t.beta);
    read(in, "mu", t.mu);
    read(in, "eta", t.eta);
    read(in, "T", t.horizon);
    if (in.contains("norm_mode")) t.norm_mode = parse_norm_mode(read_string(in, "norm_mode", ""));
    return t;
  };
  auto require = [&](const char* key) -> double {
    if (!in.contains(key)) throw ConfigError(std::string("missing input '") + key + "'");
    double v = 0.0;
    read(in, key, v);
    return v;
  };

  ordered_json out;
  out["calc"] = calc;
  try {
    if (calc == "stationarity_bound") {
      const BoundTerms b = stationarity_terms(theory_inputs(true));
      out["bound"] = b.total();
      out["terms"] = ordered_json{{"descent", b.descent}, {"noise", b.noise}, {"drift", b.drift},
                                  {"tracking", b.tracking}};
    } else if (calc == "tuned_hyperparams") {
      const TunedHyperparams h = tuned_hyperparams(theory_inputs(false));
      out["mu"] = h.mu;
      out["eta"] = h.eta;
      out["alpha"] = h.alpha;
      out["predicted_bound"] = h.predicted_bound;
    } else if (calc == "z_norm_cap") {
      check_keys(in, {"z0_norm", "t", "eta", "lambda", "m", "n"}, "inputs");
      out["cap"] = z_norm_cap(require("z0_norm"), static_cast<std::int64_t>(require("t")),
                              require("eta"), require("lambda"), static_cast<std::int64_t>(require("m")),
                              static_cast<std::int64_t>(require("n")));
    } else if (calc == "steady_state_rms") {
      check_keys(in, {"alpha", "eta", "lambda"}, "inputs");
      const double eta = require("eta"), lambda = require("lambda");
      out["rho"] = steady_state_rms(require("alpha"), eta, lambda);
      if (!steady_state_regime_ok(eta, lambda)) {
        out["warning"] = "eta*lambda exceeds 0.01; the steady-state formula is only indicative";
      }
    } else if (calc == "decay_at_y_growth") {
      check_keys(in, {"beta", "eta", "lambda"}, "inputs");
      out["lambda1"] = decay_at_y_growth(require("beta"), require("eta"), require("lambda"));
    } else if (calc == "state_size") {
      check_keys(in, {"kind", "m", "n"}, "inputs");
      const OptimizerKind k = parse_optimizer_kind(read_string(in, "kind", ""));
      out["state_size"] = state_size(k, static_cast<std::int64_t>(require("m")),
                                     static_cast<std::int64_t>(require("n")));
    } else {
      throw ConfigError("unknown calculator: '" + calc + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out.dump(2);
}

}  // namespace sfspec

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sfspec/harness.hpp"
#include "sfspec/linalg.hpp"
#include "sfspec/optimizers.hpp"
#include "sfspec/polar.hpp"
#include "sfspec/problems.hpp"
#include "sfspec/theory.hpp"

using namespace sfspec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double fro(const Matrix& a) {
  long double s = 0;
  for (double x : a.data()) s += static_cast<long double>(x) * x;
  return std::sqrt(static_cast<double>(s));
}

double inner(const Matrix& a, const Matrix& b) {
  long double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<long double>(a.data()[k]) * b.data()[k];
  return static_cast<double>(s);
}

std::pair<std::size_t, std::size_t> random_shape(std::mt19937_64& rng, int k, std::size_t max_dim) {
  std::uniform_int_distribution<std::size_t> dim(1, max_dim);
  std::size_t a = dim(rng), b = dim(rng);
  if (a > b) std::swap(a, b);
  switch (k % 3) {
    case 0:
      return {b, a};  // tall
    case 1:
      return {a, b};  // wide
    default:
      return {b, b};  // square
  }
}

// Random U with operator norm at most one: either a random contraction or the
// polar factor of a perturbed G, which sits close to the maximizer.
Matrix random_unit_ball(const Matrix& g, std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (k % 2 == 0) {
    std::vector<double> s(std::min(g.rows(), g.cols()));
    for (double& x : s) x = u01(rng);
    s[0] = 1.0;
    return oracle::with_spectrum(g.rows(), g.cols(), s, rng);
  }
  return oracle::polar(g + oracle::random_matrix(g.rows(), g.cols(), rng, 0.05 * (1 + k % 7)));
}

Outcome polar_duality() {
  std::mt19937_64 rng(1001);
  double worst_rel = 0.0, worst_excess = -INFINITY;
  for (int k = 0; k < 200; ++k) {
    const auto [m, n] = random_shape(rng, k, 64);
    const Matrix g = oracle::random_matrix(m, n, rng);
    const double nuc = oracle::nuclear(g);
    worst_rel = std::max(worst_rel, std::abs(inner(g, exact_polar(g)) - nuc) / nuc);
    for (int j = 0; j < 5; ++j) worst_excess = std::max(worst_excess, inner(g, random_unit_ball(g, rng, j)) - nuc);
  }
  return {worst_rel <= 1e-9 && worst_excess <= 1e-9,
          fmt("max rel err %.2e; max <G,U> - ||G||_* over 1000 U %.3g", worst_rel, worst_excess)};
}

Outcome polar_alignment() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> scale(0.0, 2.0);
  double worst = -INFINITY;
  for (int k = 0; k < 500; ++k) {
    const auto [m, n] = random_shape(rng, k, 24);
    const Matrix g = oracle::random_matrix(m, n, rng);
    const Matrix mm = g + oracle::random_matrix(m, n, rng, scale(rng));
    const double rhs = oracle::nuclear(g) - 2.0 * oracle::nuclear(g - mm);
    worst = std::max(worst, rhs - inner(g, exact_polar(mm)));
  }
  return {worst <= 1e-9, fmt("max violation %.3g over 500 pairs", worst)};
}

Outcome averaging_identities() {
  const ProblemPtr prob = quadratic_problem(6, 4, 8.0, 1003);
  double err_uniform = 0.0, err_eq4 = 0.0, err_sq = 0.0;
  for (auto mode : {AveragingMode::uniform, AveragingMode::lr_squared}) {
    Hyperparams hp = Hyperparams::defaults_for(OptimizerKind::sf_sgd);
    hp.eta = 0.01;
    hp.warmup_steps = 1;
    hp.lambda = 0.0;
    hp.averaging = mode;
    ParamState s = init_state(OptimizerKind::sf_sgd, prob->initial_point(1)[0], hp);
    std::vector<Matrix> zs = {s.z};
    for (int t = 1; t <= 1000; ++t) {
      const Matrix x_t = current_x(s, hp.beta1);
      const Matrix z_t = s.z;
      const Matrix g = prob->grad({s.live})[0];
      sf_sgd_step(s, g, hp);
      zs.push_back(s.z);
      if (mode == AveragingMode::uniform) {
        const double c = 1.0 / (t + 1.0);
        Matrix expect = x_t;
        expect.axpy(-hp.eta * c, g);
        expect.axpy(c, z_t - x_t);
        err_eq4 = std::max(err_eq4, max_abs_diff(expect, current_x(s, hp.beta1)));
      }
    }
    // zs[0] is Z_1; X after T steps averages Z_1..Z_{T+1} or Z_2..Z_{T+1}.
    const std::size_t first = mode == AveragingMode::uniform ? 0 : 1;
    std::vector<long double> mean(zs[0].size(), 0.0L);
    for (std::size_t i = first; i < zs.size(); ++i)
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += zs[i].data()[k];
    const Matrix x = current_x(s, hp.beta1);
    double err = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k)
      err = std::max(err, std::abs(static_cast<double>(mean[k] / (zs.size() - first)) - x.data()[k]));
    (mode == AveragingMode::uniform ? err_uniform : err_sq) = err;
  }
  return {err_uniform <= 1e-12 && err_eq4 <= 1e-12 && err_sq <= 1e-12,
          fmt("uniform mean err %.2e, step identity err %.2e, eta^2-weighted mean err %.2e", err_uniform, err_eq4,
              err_sq)};
}

Outcome norm_cap() {
  const double etas[] = {0.004, 0.006, 0.008, 0.01, 0.015};
  const double lambdas[] = {0.05, 0.1};
  std::int64_t checks = 0, violations = 0;
  double worst_ratio = 0.0;
  int idx = 0;
  for (double eta : etas) {
    for (double lambda : lambdas) {
      RunConfig cfg;
      cfg.optimizer = OptimizerKind::sf_normuon;
      cfg.hp = Hyperparams::defaults_for(cfg.optimizer);
      cfg.hp.eta = eta;
      cfg.hp.lambda = lambda;
      cfg.hp.warmup_steps = 300;
      cfg.problem.m = 16;
      cfg.problem.n = 12;
      cfg.problem.init_scale = 20.0;
      cfg.sigma = 1.0;
      cfg.steps = 3000;
      cfg.log_every = 3000;
      cfg.seed = 2000 + idx++;
      const double m = 16, n = 12;
      double z_ref = 0.0;
      const StepObserver obs = [&](std::int64_t t, const Optimizer& opt, const std::vector<StepInfo>&) {
        const double z = fro(opt.z()[0]);
        if (t == cfg.hp.warmup_steps) z_ref = z;
        if (t <= cfg.hp.warmup_steps) return;
        const double cap = z_ref * std::pow(1.0 - eta * lambda, static_cast<double>(t - cfg.hp.warmup_steps)) +
                           0.2 * std::sqrt(m * n) / lambda;
        ++checks;
        if (z > cap) ++violations;
        worst_ratio = std::max(worst_ratio, z / cap);
      };
      if (run(cfg, obs).summary.diverged) ++violations;
    }
  }
  return {violations == 0 && checks == 10 * 2700,
          fmt("%.0f violations in %.0f post-warmup steps; max ||Z||/cap %.4f", double(violations), double(checks),
              worst_ratio)};
}

Outcome steady_state() {
  RunConfig cfg;
  cfg.optimizer = OptimizerKind::sf_normuon;
  cfg.hp = Hyperparams::defaults_for(cfg.optimizer);
  cfg.hp.eta = 0.01;
  cfg.hp.lambda = 0.05;
  cfg.hp.warmup_steps = 2000;
  cfg.problem.m = 64;
  cfg.problem.n = 64;
  cfg.problem.condition = 10.0;
  cfg.sigma = 1.0;
  cfg.steps = 20000;
  cfg.log_every = 20000;
  cfg.seed = 5;
  const double rms_dim = 64.0;
  double rho_prev = fro(make_problem(cfg)->initial_point(derive_seed(cfg.seed, 0))[0]) / rms_dim;
  std::int64_t settled_at = -1;
  double max_qss_after = 0.0, err_sum = 0.0;
  std::int64_t err_n = 0;
  const std::int64_t quarter_start = cfg.steps - cfg.steps / 4;
  const StepObserver obs = [&](std::int64_t t, const Optimizer& opt, const std::vector<StepInfo>& info) {
    const double rho_next = fro(opt.z()[0]) / rms_dim;
    const double qss = std::abs(rho_next - rho_prev) / rho_prev;
    if (t > cfg.hp.warmup_steps) {
      if (settled_at < 0 && qss < 0.01) settled_at = t;
      if (settled_at >= 0) max_qss_after = std::max(max_qss_after, qss);
    }
    if (t > quarter_start) {
      // alpha refers to Z_t, the iterate entering this step.
      const double a = info[0].alpha;
      const double pred = (0.1 / cfg.hp.lambda) * (-a + std::sqrt(a * a + 2.0 * cfg.hp.eta * cfg.hp.lambda));
      err_sum += std::abs(rho_prev - pred) / pred;
      ++err_n;
    }
    rho_prev = rho_next;
  };
  const RunResult r = run(cfg, obs);
  const double err = err_n ? err_sum / err_n : INFINITY;
  const bool ok = !r.summary.diverged && settled_at >= 0 && settled_at < quarter_start && err <= 0.10;
  return {ok, fmt("qss < 0.01 from step %.0f (max after %.2e); mean rel err over final quarter %.4f",
                  double(settled_at), max_qss_after, err)};
}

Outcome growth_eigenvalue() {
  std::mt19937_64 rng(1006);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double beta = u01(rng), eta = 1e-4 + 0.1 * u01(rng), lambda = 1e-3 + u01(rng);
    const double el = eta * lambda;
    const double top = oracle::top_eigenvalue_2x2(1 - el, el * beta, el, 1 + el * beta);
    worst = std::max(worst, std::abs(decay_at_y_growth(beta, eta, lambda) - top));
  }
  bool exact_one = true;
  for (int k = 0; k < 20; ++k) exact_one = exact_one && decay_at_y_growth(0.0, u01(rng), u01(rng)) == 1.0;
  return {worst <= 1e-10 && exact_one, fmt("max abs err %.2e; beta = 0 gives exactly 1: ", worst) +
                                           (exact_one ? "yes" : "no")};
}

// Deterministic quadratic, sf_spectral_momentum with the tuned (mu, eta) for
// each horizon. D_F must bound 2 max(||W*||, ||Z_t||) along the actual
// trajectory, which itself depends on eta through D_F; iterate to a
// self-consistent value.
Outcome stationarity_rate() {
  const std::size_t dim = 8;
  const double cond = 4.0, beta = 0.5;
  const ProblemPtr prob = quadratic_problem(dim, dim, cond, 11);
  const Params w0 = prob->initial_point(3);
  const double w_star = fro(prob->constants().w_star->at(0));
  const double lf = cond * cond;
  const double delta = prob->loss(w0);  // f(Y_1) - f*, f* = 0
  std::vector<double> logs_t, logs_avg;
  std::string detail;
  bool ok = true;
  for (std::int64_t horizon : {100, 1000, 10000}) {
    double d = 2.0 * std::max(w_star, fro(w0[0]));
    bool consistent = false;
    double avg = 0.0, bound = 0.0;
    for (int iter = 0; iter < 20 && !consistent; ++iter) {
      TheoryInputs in;
      in.delta = delta;
      in.smoothness = lf;
      in.diameter = d;
      in.r = dim;
      in.beta = beta;
      in.horizon = horizon;
      const TunedHyperparams tuned = tuned_hyperparams(in);
      Hyperparams hp = Hyperparams::defaults_for(OptimizerKind::sf_spectral_momentum);
      hp.eta = tuned.eta;
      hp.mu = tuned.mu;
      hp.beta1 = beta;
      hp.polar_backend = PolarBackend::exact;
      Optimizer opt(OptimizerKind::sf_spectral_momentum, hp, w0, {true});
      long double acc = 0.0L;
      double z_max = fro(w0[0]);
      for (std::int64_t t = 1; t <= horizon; ++t) {
        const Params g = prob->grad(opt.live());
        acc += oracle::nuclear(g[0]);
        opt.step(g);
        z_max = std::max(z_max, fro(opt.z()[0]));
      }
      avg = static_cast<double>(acc / horizon);
      bound = oracle::frobenius_bound(delta, lf, d, dim, 0.0, 1.0, beta, tuned.mu, tuned.eta, horizon);
      const double needed = 2.0 * std::max(w_star, z_max);
      if (needed <= d) {
        consistent = true;
      } else {
        d = 1.05 * needed;
      }
    }
    ok = ok && consistent && avg <= bound;
    logs_t.push_back(std::log(static_cast<double>(horizon)));
    logs_avg.push_back(std::log(avg));
    detail += fmt("T=%.0f avg %.4g <= bound %.4g (D_F %.3g); ", double(horizon), avg, bound, d);
  }
  const double mt = (logs_t[0] + logs_t[1] + logs_t[2]) / 3, ma = (logs_avg[0] + logs_avg[1] + logs_avg[2]) / 3;
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (logs_t[i] - mt) * (logs_avg[i] - ma);
    den += (logs_t[i] - mt) * (logs_t[i] - mt);
  }
  const double slope = num / den;
  ok = ok && slope >= -0.7 && slope <= -0.3;
  return {ok, detail + fmt("log-log slope %.3f", slope)};
}

Outcome tuned_optimality() {
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto lu = [&](double lo, double hi) { return lo * std::pow(hi / lo, u01(rng)); };
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    TheoryInputs in;
    in.delta = lu(0.1, 10);
    in.smoothness = lu(0.1, 10);
    in.diameter = lu(0.1, 10);
    in.r = 1 + static_cast<std::int64_t>(63 * u01(rng));
    in.batch = 1 + static_cast<std::int64_t>(63 * u01(rng));
    in.sigma = u01(rng) < 0.3 ? 0.0 : lu(0.01, 1);
    in.beta = 0.95 * u01(rng);
    in.horizon = static_cast<std::int64_t>(lu(1e2, 1e6));
    const TunedHyperparams tuned = tuned_hyperparams(in);
    auto bound_at = [&](double mu, double eta) {
      return oracle::frobenius_bound(in.delta, in.smoothness, in.diameter, in.r, in.sigma, in.batch, in.beta, mu,
                                     eta, in.horizon);
    };
    const double at_tuned = bound_at(tuned.mu, tuned.eta);
    double best = INFINITY;
    for (int i = 0; i < 200; ++i)
      for (int j = 0; j < 200; ++j)
        best = std::min(best, bound_at(0.999 * i / 199.0, tuned.eta * std::pow(10.0, -2.0 + 4.0 * j / 199.0)));
    worst = std::max(worst, 1.0 - best / at_tuned);
  }
  return {worst <= 0.10, fmt("largest grid improvement over the tuned bound %.4f", worst)};
}

// Tiny MLP, table defaults, noisy gradients. Smoothed loss is the mean of
// loss_x over the final 200 steps. Row normalization is compared against its
// ablation on three noise replicates per seed; "noise" is twice the sample
// standard deviation of the row-normalized replicates.
Outcome ablation_direction() {
  auto smoothed = [](const RunResult& r) {
    double s = 0.0;
    const std::size_t n = 20;  // log_every 10
    for (std::size_t i = r.records.size() - n; i < r.records.size(); ++i) s += r.records[i].loss_x;
    return s / n;
  };
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig base;
    base.optimizer = OptimizerKind::sf_normuon;
    base.hp = Hyperparams::defaults_for(base.optimizer);
    base.problem.kind = "mlp";
    base.problem.input_dim = 8;
    base.problem.hidden_dim = 16;
    base.problem.classes = 4;
    base.problem.n_samples = 512;
    base.steps = 5000;
    base.sigma = 1.0;
    base.seed = seed;
    base.log_every = 10;
    std::vector<double> row, norow;
    double mu0 = 0.0;
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
      RunConfig c = base;
      c.noise_seed = 1000 + rep;
      row.push_back(smoothed(run(c)));
      c.no_row_norm = true;
      norow.push_back(smoothed(run(c)));
      if (rep == 0) {
        c.no_row_norm = false;
        c.no_momentum = true;
        mu0 = smoothed(run(c));
      }
    }
    const double row_mean = (row[0] + row[1] + row[2]) / 3, norow_mean = (norow[0] + norow[1] + norow[2]) / 3;
    double var = 0.0;
    for (double v : row) var += (v - row_mean) * (v - row_mean);
    const double noise = 2.0 * std::sqrt(var / 2.0);
    ok = ok && row[0] < mu0 && row_mean - norow_mean <= noise;
    detail += fmt("seed %.0f: mu=0.8 %.4f vs mu=0 %.4f, no-row gain %.4f", double(seed), row[0], mu0,
                  row_mean - norow_mean) +
              fmt(" (noise %.4f); ", noise);
  }
  return {ok, detail};
}

Outcome state_accounting() {
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<std::int64_t> dim(1, 512);
  bool ok = true;
  for (int k = 0; k < 10; ++k) {
    const std::int64_t m = dim(rng), n = dim(rng);
    ok = ok && state_size(OptimizerKind::sf_adamw, m, n) == 3 * m * n;
    ok = ok && state_size(OptimizerKind::sf_normuon, m, n) == 3 * m * n + m;
    ok = ok && state_size(OptimizerKind::normuon_cosine, m, n) == 2 * m * n + m;
  }
  return {ok, "10 random shapes, three optimizers"};
}

double fd_relative_error(const Problem& p, const Params& w) {
  const Params g = p.grad(w);
  const double h = 1e-5;
  long double diff = 0, gn = 0, fn = 0;
  for (std::size_t b = 0; b < w.size(); ++b)
    for (std::size_t k = 0; k < w[b].size(); ++k) {
      Params plus = w, minus = w;
      plus[b].data()[k] += h;
      minus[b].data()[k] -= h;
      const double fd = (p.loss(plus) - p.loss(minus)) / (2 * h);
      const double an = g[b].data()[k];
      diff += (fd - an) * (fd - an);
      gn += an * an;
      fn += fd * fd;
    }
  const double scale = std::sqrt(static_cast<double>(std::max(gn, fn)));
  return scale == 0.0 ? 0.0 : std::sqrt(static_cast<double>(diff)) / scale;
}

Outcome gradient_checks() {
  std::mt19937_64 rng(1011);
  struct Case {
    ProblemPtr p;
    double tol;
  };
  const Case cases[] = {{quadratic_problem(7, 5, 10.0, 1), 1e-4},
                        {matrix_regression_problem(64, 6, 4, 0.1, 2), 1e-4},
                        {tiny_mlp_problem(8, 16, 4, 64, 3), 1e-3}};
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      Params w;
      for (const auto& b : c.p->blocks()) w.push_back(oracle::random_matrix(b.rows, b.cols, rng));
      worst = std::max(worst, fd_relative_error(*c.p, w));
    }
    ok = ok && worst <= c.tol;
    detail += c.p->kind() + fmt(" %.2e; ", worst);
  }
  return {ok, detail};
}

Outcome determinism() {
  const char* configs[] = {
      R"({"optimizer": "sf_sgd", "steps": 300, "seed": 1, "hyperparams": {"eta": 0.01}})",
      R"({"optimizer": "sf_normuon", "steps": 600, "seed": 2, "sigma": 1.0, "hyperparams": {"warmup_steps": 100}})",
      R"({"optimizer": "sf_adamw", "steps": 400, "seed": 3, "sigma": 0.5, "problem": {"kind": "regression"}})",
      R"({"optimizer": "sf_spectral_momentum", "steps": 300, "seed": 4, "polar_backend": "exact"})",
      R"({"optimizer": "normuon_cosine", "steps": 300, "seed": 5, "sigma": 0.3, "problem": {"kind": "mlp", "n_samples": 64}})",
      R"({"optimizer": "adamw_cosine", "steps": 300, "seed": 6, "sigma": 0.3, "problem": {"kind": "mlp", "n_samples": 64}})",
  };
  int identical = 0, total = 0;
  for (const char* text : configs) {
    std::string csv[2];
    for (auto& out : csv) {
      std::ostringstream os;
      write_trajectory_csv(os, run(parse_run_config(text)).records);
      out = os.str();
    }
    ++total;
    if (csv[0] == csv[1] && !csv[0].empty()) ++identical;
  }
  return {identical == total, fmt("%.0f of %.0f configs reproduce byte-identical CSV", identical, total)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"polar duality", polar_duality},
      {"polar alignment", polar_alignment},
      {"averaging identities", averaging_identities},
      {"norm cap under decay at Z", norm_cap},
      {"steady-state RMS", steady_state},
      {"decay-at-Y growth eigenvalue", growth_eigenvalue},
      {"stationarity bound on the deterministic quadratic", stationarity_rate},
      {"tuned hyperparameter optimality", tuned_optimality},
      {"ablation direction", ablation_direction},
      {"state accounting", state_accounting},
      {"gradient checks", gradient_checks},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s [%.1fs] %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

#include "sfspec/verify.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sfspec/errors.hpp"
#include "sfspec/harness.hpp"
#include "sfspec/linalg.hpp"
#include "sfspec/polar.hpp"
#include "sfspec/problems.hpp"
#include "sfspec/theory.hpp"

namespace sfspec {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void add(VerifyReport& r, std::string name, bool ok, std::string detail) {
  r.checks.push_back({std::move(name), ok, std::move(detail)});
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

void suite_polar(VerifyReport& r, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, 16);
  double worst_dual = 0.0, worst_align = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Matrix g = gaussian_matrix(dim(rng), dim(rng), 1.0, rng);
    const double nuc = nuclear_norm(g);
    worst_dual = std::max(worst_dual, std::abs(dual_pairing(g, exact_polar(g)) - nuc) / nuc);

    const Matrix m = g + gaussian_matrix(g.rows(), g.cols(), 0.5, rng);
    const double lhs = dual_pairing(g, exact_polar(m));
    const double rhs = nuc - 2.0 * nuclear_norm(g - m);
    worst_align = std::max(worst_align, rhs - lhs);
  }
  add(r, "duality <G, polar(G)> = ||G||_*", worst_dual <= 1e-9, "max rel err " + num(worst_dual));
  add(r, "alignment <g, polar(M)> >= ||g||_* - 2||g - M||_*", worst_align <= 1e-9,
      "max violation " + num(worst_align));
  const Matrix zero(3, 4);
  add(r, "polar of zero is zero",
      exact_polar(zero).is_zero() && newton_schulz_polar(zero).is_zero(), "");
}

void suite_averaging(VerifyReport& r) {
  const ProblemPtr prob = quadratic_problem(4, 3, 5.0, 7);
  for (AveragingMode mode : {AveragingMode::uniform, AveragingMode::lr_squared}) {
    Hyperparams hp = Hyperparams::defaults_for(OptimizerKind::sf_sgd);
    hp.eta = 0.05;
    hp.averaging = mode;
    Optimizer opt(OptimizerKind::sf_sgd, hp, prob->initial_point(1), {true});
    Matrix z_sum = opt.z()[0];
    std::int64_t z_count = 1;
    if (mode == AveragingMode::lr_squared) {
      z_sum = Matrix(z_sum.rows(), z_sum.cols());
      z_count = 0;
    }
    double worst_step = 0.0;
    const int steps = 300;
    for (int t = 1; t <= steps; ++t) {
      const Matrix x_t = opt.x()[0];
      const Matrix z_t = opt.z()[0];
      const Params g = prob->grad(opt.live());
      const auto info = opt.step(g)[0];
      // x_{t+1} = x_t - eta c g_t + c (z_t - x_t)
      Matrix expect = x_t;
      expect.axpy(-hp.eta * info.c, g[0]);
      expect.axpy(info.c, z_t - x_t);
      worst_step = std::max(worst_step, max_abs_diff(expect, opt.x()[0]));
      z_sum += opt.z()[0];
      ++z_count;
    }
    z_sum *= 1.0 / static_cast<double>(z_count);
    const double err = max_abs_diff(z_sum, opt.x()[0]);
    const std::string tag(to_string(mode));
    add(r, tag + ": X_T equals the mean of the fast iterates", err <= 1e-12, "max abs err " + num(err));
    add(r, tag + ": per-step effective learning-rate identity", worst_step <= 1e-12,
        "max abs err " + num(worst_step));
  }
}

void suite_lemma1(VerifyReport& r) {
  const double etas[] = {0.004, 0.015};
  const double lambdas[] = {0.05, 0.1};
  int idx = 0;
  for (double eta : etas) {
    for (double lambda : lambdas) {
      RunConfig cfg;
      cfg.optimizer = OptimizerKind::sf_normuon;
      cfg.hp = Hyperparams::defaults_for(cfg.optimizer);
      cfg.hp.eta = eta;
      cfg.hp.lambda = lambda;
      cfg.hp.warmup_steps = 200;
      cfg.problem.m = 12;
      cfg.problem.n = 8;
      cfg.problem.init_scale = 20.0;
      cfg.sigma = 1.0;
      cfg.steps = 2000;
      cfg.log_every = 1000;
      cfg.seed = 100 + idx++;
      const RunSummary s = run(cfg).summary;
      const bool ok = !s.diverged && s.cap_violations && *s.cap_violations == 0 && s.cap_checks > 0;
      add(r, "cap holds, eta=" + num(eta) + " lambda=" + num(lambda), ok,
          "violations " + std::to_string(s.cap_violations.value_or(-1)) + " of " +
              std::to_string(s.cap_checks));
    }
  }
}

void suite_lemma2(VerifyReport& r) {
  RunConfig cfg;
  cfg.optimizer = OptimizerKind::sf_normuon;
  cfg.hp = Hyperparams::defaults_for(cfg.optimizer);
  cfg.hp.eta = 0.01;
  cfg.hp.lambda = 0.05;
  cfg.hp.warmup_steps = 1000;
  cfg.problem.m = 48;
  cfg.problem.n = 48;
  cfg.problem.condition = 10.0;
  cfg.sigma = 1.0;
  cfg.steps = 12000;
  cfg.log_every = 1000;
  cfg.seed = 5;
  const RunSummary s = run(cfg).summary;
  const double err = s.steady_state_rel_error.value_or(INFINITY);
  add(r, "steady-state rms within 10% over the last quarter", !s.diverged && err <= 0.10,
      "mean rel err " + num(err));
  add(r, "post-warmup qss ratio below 0.01", s.max_post_warmup_qss < 0.01,
      "max " + num(s.max_post_warmup_qss));
}

void suite_eigen(VerifyReport& r, const VerifyOptions& opts, std::mt19937_64& rng) {
  const auto& formula = opts.growth_formula ? opts.growth_formula
                                            : std::function<double(double, double, double)>(decay_at_y_growth);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  bool above_one = true;
  for (int k = 0; k < 100; ++k) {
    const double beta = u01(rng);
    const double eta = 1e-4 + 0.05 * u01(rng);
    const double lambda = 1e-3 + 0.5 * u01(rng);
    const double el = eta * lambda;
    // Top eigenvalue of [[1 - el, el beta], [el, 1 + el beta]] from its entries.
    const double a = 1.0 - el, b = el * beta, c = el, d = 1.0 + el * beta;
    const double top = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * c);
    const double got = formula(beta, eta, lambda);
    worst = std::max(worst, std::abs(got - top));
    if (beta > 0.0 && !(got > 1.0)) above_one = false;
  }
  add(r, "growth eigenvalue matches the 2x2 iteration matrix", worst <= 1e-10, "max abs err " + num(worst));
  add(r, "growth eigenvalue is exactly 1 at beta = 0", formula(0.0, 0.01, 0.05) == 1.0, "");
  add(r, "growth eigenvalue exceeds 1 for beta > 0", above_one, "");
}

void suite_bound(VerifyReport& r, std::mt19937_64& rng) {
  TheoryInputs unit;
  const double expected = 6.0 + std::numbers::pi * std::numbers::pi / 3.0;
  const double got = stationarity_bound(unit);
  add(r, "unit inputs evaluate to 9.289868...", rel_err(got, expected) <= 1e-14, num(got));

  TheoryInputs noisy = unit;
  noisy.sigma = 0.7;
  noisy.mu = 0.5;
  noisy.horizon = 100;
  TheoryInputs quiet = noisy;
  quiet.sigma = 0.0;
  const BoundTerms tn = stationarity_terms(noisy);
  const double diff = stationarity_bound(noisy) - stationarity_bound(quiet);
  add(r, "sigma -> 0 removes exactly the noise terms", rel_err(diff, tn.noise) <= 1e-12, num(diff));

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u01(rng)); };
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    TheoryInputs in;
    in.delta = log_uniform(0.1, 10.0);
    in.smoothness = log_uniform(0.1, 10.0);
    in.diameter = log_uniform(0.1, 10.0);
    in.r = 1 + static_cast<std::int64_t>(63 * u01(rng));
    in.batch = 1 + static_cast<std::int64_t>(63 * u01(rng));
    in.sigma = u01(rng) < 0.3 ? 0.0 : log_uniform(0.01, 1.0);
    in.beta = 0.95 * u01(rng);
    in.horizon = static_cast<std::int64_t>(log_uniform(1e2, 1e6));
    const TunedHyperparams tuned = tuned_hyperparams(in);
    double best = INFINITY;
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 200; ++j) {
        TheoryInputs probe = in;
        probe.mu = 0.999 * i / 199.0;
        probe.eta = tuned.eta * std::pow(10.0, -2.0 + 4.0 * j / 199.0);
        best = std::min(best, stationarity_bound(probe));
      }
    }
    worst = std::max(worst, 1.0 - best / tuned.predicted_bound);
  }
  add(r, "tuned hyperparameters within 10% of the grid optimum", worst <= 0.10,
      "largest grid improvement " + num(worst));
}

void suite_gradcheck(VerifyReport& r, std::mt19937_64& rng) {
  struct Case {
    ProblemPtr p;
    double tol;
  };
  const Case cases[] = {{quadratic_problem(6, 5, 10.0, 3), 1e-4},
                        {matrix_regression_problem(40, 5, 3, 0.1, 3), 1e-4},
                        {tiny_mlp_problem(5, 7, 3, 30, 3), 1e-3}};
  for (const Case& c : cases) {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      Params pt;
      for (const auto& b : c.p->blocks()) pt.push_back(gaussian_matrix(b.rows, b.cols, 1.0, rng));
      worst = std::max(worst, gradient_check(*c.p, pt));
    }
    add(r, c.p->kind() + " gradient matches central differences", worst <= c.tol, "max rel err " + num(worst));
  }
}

}  // namespace

bool VerifyReport::passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

VerifyReport verify(const std::string& suite, const VerifyOptions& opts) {
  VerifyReport r;
  r.suite = suite;
  std::mt19937_64 rng(opts.seed);
  auto run_one = [&](const std::string& name) {
    if (name == "polar") suite_polar(r, rng);
    else if (name == "averaging") suite_averaging(r);
    else if (name == "lemma1") suite_lemma1(r);
    else if (name == "lemma2") suite_lemma2(r);
    else if (name == "eigen") suite_eigen(r, opts, rng);
    else if (name == "bound") suite_bound(r, rng);
    else if (name == "gradcheck") suite_gradcheck(r, rng);
    else throw ConfigError("unknown verify suite: '" + name + "'");
  };
  if (suite == "all") {
    for (const auto& name : verify_suite_names()) {
      const std::size_t before = r.checks.size();
      run_one(name);
      for (std::size_t i = before; i < r.checks.size(); ++i) r.checks[i].name = name + ": " + r.checks[i].name;
    }
  } else {
    run_one(suite);
  }
  return r;
}

std::string report_json(const VerifyReport& r) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["passed"] = r.passed();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    arr.push_back(nlohmann::ordered_json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  j["checks"] = arr;
  return j.dump(2);
}

}  // namespace sfspec

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sfspec/harness.hpp"
#include "sfspec/linalg.hpp"
#include "sfspec/optimizers.hpp"
#include "sfspec/problems.hpp"

using namespace sfspec;

namespace {

Params random_point(const Problem& p, std::mt19937_64& rng, double sd = 1.0) {
  Params out;
  for (const auto& b : p.blocks()) out.push_back(oracle::random_matrix(b.rows, b.cols, rng, sd));
  return out;
}

// Minimizer of a convex quadratic in a single m x n block, recovered from
// gradient probes: grad(W) = H W - C, so grad(0) = -C and column k of H is
// grad(e_k e_1^T) - grad(0) in its first column. Solves H W = C.
Matrix normal_equations_minimizer(const Problem& p) {
  const auto b = p.blocks()[0];
  const Matrix g0 = p.grad({Matrix(b.rows, b.cols)})[0];
  Eigen::MatrixXd h(b.rows, b.rows);
  for (std::size_t k = 0; k < b.rows; ++k) {
    Matrix e(b.rows, b.cols);
    e(k, 0) = 1.0;
    const Matrix gk = p.grad({e})[0];
    for (std::size_t i = 0; i < b.rows; ++i) h(i, k) = gk(i, 0) - g0(i, 0);
  }
  const Eigen::MatrixXd w = h.ldlt().solve(-oracle::to_eigen(g0));
  return oracle::from_eigen(w);
}

}  // namespace

TEST_CASE("quadratic problem") {
  const ProblemPtr p = quadratic_problem(5, 4, 10.0, 51);
  const auto c = p->constants();
  REQUIRE(c.w_star);
  CHECK(p->loss(*c.w_star) == 0.0);
  CHECK(p->grad(*c.w_star)[0].is_zero());
  CHECK(*c.lipschitz_frobenius == 100.0);
  CHECK(*c.f_star == 0.0);

  const ProblemPtr flat = quadratic_problem(3, 3, 1.0, 52);
  std::mt19937_64 rng(53);
  const Params w = random_point(*flat, rng);
  CHECK(max_abs_diff(flat->grad(w)[0], w[0] - flat->constants().w_star->at(0)) < 1e-15);
  CHECK_THROWS(quadratic_problem(3, 3, 0.5, 1));
  CHECK_THROWS(p->loss({Matrix(4, 5)}));
}

TEST_CASE("quadratic smoothness constant is tight") {
  const ProblemPtr p = quadratic_problem(6, 3, 7.0, 54);
  const double l = *p->constants().lipschitz_frobenius;
  std::mt19937_64 rng(55);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Params u = random_point(*p, rng), v = random_point(*p, rng);
    const double ratio = frobenius_norm(p->grad(u)[0] - p->grad(v)[0]) / frobenius_norm(u[0] - v[0]);
    CHECK(ratio <= l * (1 + 1e-12));
    worst = std::max(worst, ratio);
  }
  // Difference along the steepest row of the diagonal scaling attains L.
  double best = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    Params u = random_point(*p, rng);
    Params v = u;
    v[0](i, 0) += 1.0;
    best = std::max(best, frobenius_norm(p->grad(u)[0] - p->grad(v)[0]));
  }
  CHECK(best >= 0.99 * l);
}

TEST_CASE("regression problem") {
  const ProblemPtr exact = matrix_regression_problem(50, 4, 3, 0.0, 56);
  CHECK(exact->loss(*exact->constants().w_star) < 1e-25);
  CHECK(exact->initial_point(9)[0].is_zero());

  const ProblemPtr noisy = matrix_regression_problem(60, 5, 3, 0.3, 57);
  const Matrix w_ne = normal_equations_minimizer(*noisy);
  CHECK(max_abs_diff(w_ne, noisy->constants().w_star->at(0)) < 1e-10);
  CHECK(noisy->loss({w_ne}) == doctest::Approx(*noisy->constants().f_star).epsilon(1e-12));
}

TEST_CASE("regression floor reached by adamw matches the normal equations") {
  const ProblemPtr p = matrix_regression_problem(200, 5, 3, 0.1, 58);
  const double floor = p->loss({normal_equations_minimizer(*p)});
  Hyperparams hp = Hyperparams::defaults_for(OptimizerKind::adamw_cosine);
  hp.eta = 0.01;
  hp.lambda = 0.0;
  hp.warmup_steps = 100;
  hp.total_steps = 10000;
  Optimizer opt(OptimizerKind::adamw_cosine, hp, p->initial_point(0), {true});
  for (int t = 0; t < 10000; ++t) opt.step(p->grad(opt.live()));
  CHECK(p->loss(opt.live()) - floor >= -1e-12);
  CHECK(p->loss(opt.live()) - floor <= 1e-6);
}

TEST_CASE("mlp problem") {
  const ProblemPtr p = tiny_mlp_problem(5, 7, 3, 40, 59);
  const auto blocks = p->blocks();
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[2].is_matrix == false);
  Params zero;
  for (const auto& b : blocks) zero.push_back(Matrix(b.rows, b.cols));
  CHECK(p->loss(zero) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(p->initial_point(1) == p->initial_point(1));
  CHECK(!(p->initial_point(1) == p->initial_point(2)));
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(60);
  struct Case {
    ProblemPtr p;
    double tol;
  };
  for (const Case& c : {Case{quadratic_problem(4, 6, 20.0, 61), 1e-4}, Case{matrix_regression_problem(30, 6, 2, 0.2, 62), 1e-4},
                        Case{tiny_mlp_problem(4, 9, 3, 25, 63), 1e-3}}) {
    for (int k = 0; k < 10; ++k) CHECK(gradient_check(*c.p, random_point(*c.p, rng)) <= c.tol);
  }
  // Independent finite differences with a per-entry loop.
  const ProblemPtr p = tiny_mlp_problem(3, 4, 2, 10, 64);
  const Params w = random_point(*p, rng);
  const Params g = p->grad(w);
  const double h = 1e-6;
  for (std::size_t b = 0; b < w.size(); ++b)
    for (std::size_t k = 0; k < w[b].size(); ++k) {
      Params a = w, c = w;
      a[b].data()[k] += h;
      c[b].data()[k] -= h;
      CHECK((p->loss(a) - p->loss(c)) / (2 * h) == doctest::Approx(g[b].data()[k]).epsilon(1e-5).scale(1e-6));
    }
}

TEST_CASE("noise oracle statistics") {
  const ProblemPtr p = quadratic_problem(3, 4, 5.0, 65);
  std::mt19937_64 rng(66);
  const Params w = random_point(*p, rng);
  const Matrix exact = p->grad(w)[0];

  NoiseOracle none(0.0, 1, 1);
  CHECK(noisy_grad(*p, w, none)[0] == exact);

  const double sigma = 0.8;
  const std::int64_t batch = 4;
  NoiseOracle o(sigma, batch, 67);
  const int n = 100000;
  Matrix sum(3, 4);
  double energy = 0.0;
  for (int k = 0; k < n; ++k) {
    const Matrix d = noisy_grad(*p, w, o)[0] - exact;
    sum += d;
    energy += std::pow(frobenius_norm(d), 2);
  }
  const double per_entry_sd = sigma / std::sqrt(batch * 12.0);
  for (std::size_t k = 0; k < 12; ++k) CHECK(std::abs(sum.data()[k] / n) <= 3.0 * per_entry_sd / std::sqrt(double(n)));
  CHECK(energy / n == doctest::Approx(sigma * sigma / batch).epsilon(0.05));
}

TEST_CASE("sf-normuon decreases the mlp loss in 200-step block averages") {
  RunConfig cfg;
  cfg.problem.kind = "mlp";
  cfg.problem.n_samples = 256;
  cfg.problem.hidden_dim = 16;
  cfg.steps = 5000;
  cfg.seed = 3;
  const RunResult r = run(cfg);
  REQUIRE(!r.summary.diverged);
  double prev = INFINITY;
  for (std::size_t start = 0; start + 200 <= r.records.size(); start += 200) {
    double avg = 0.0;
    for (std::size_t i = start; i < start + 200; ++i) avg += r.records[i].loss_x;
    avg /= 200.0;
    CHECK(avg < prev);
    prev = avg;
  }
}

#include "sfspec/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sfspec/linalg.hpp"

namespace sfspec {

namespace {

// Decorrelates the streams derived from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(std::size_t m, std::size_t n, double condition, std::uint64_t seed,
                   double init_scale)
      : a_(m), init_scale_(init_scale), condition_(condition) {
    if (m == 0 || n == 0) throw std::invalid_argument("quadratic_problem: empty shape");
    if (!(condition >= 1.0)) throw std::invalid_argument("quadratic_problem: condition must be >= 1");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("quadratic_problem: init_scale must be >= 0");
    for (std::size_t i = 0; i < m; ++i) {
      const double frac = m == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(m - 1);
      a_[i] = std::pow(condition, frac);
    }
    std::mt19937_64 rng(mix_seed(seed, 1));
    w_star_ = gaussian_matrix(m, n, 1.0, rng);
  }

  std::string kind() const override { return "quadratic"; }

  std::vector<ParamBlock> blocks() const override {
    return {{"W", w_star_.rows(), w_star_.cols(), true}};
  }

  double loss(const Params& p) const override {
    check_shapes(p);
    double acc = 0.0;
    for (std::size_t i = 0; i < w_star_.rows(); ++i) {
      for (std::size_t j = 0; j < w_star_.cols(); ++j) {
        const double r = a_[i] * (p[0](i, j) - w_star_(i, j));
        acc += r * r;
      }
    }
    return 0.5 * acc;
  }

  Params grad(const Params& p) const override {
    check_shapes(p);
    Matrix g(w_star_.rows(), w_star_.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double a2 = a_[i] * a_[i];
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = a2 * (p[0](i, j) - w_star_(i, j));
    }
    return {std::move(g)};
  }

  Params initial_point(std::uint64_t seed) const override {
    std::mt19937_64 rng(mix_seed(seed, 2));
    if (init_scale_ == 0.0) return {Matrix(w_star_.rows(), w_star_.cols())};
    return {gaussian_matrix(w_star_.rows(), w_star_.cols(), init_scale_, rng)};
  }

  ProblemConstants constants() const override {
    ProblemConstants c;
    c.lipschitz_frobenius = condition_ * condition_;
    c.f_star = 0.0;
    c.w_star = Params{w_star_};
    return c;
  }

 private:
  std::vector<double> a_;
  Matrix w_star_;
  double init_scale_;
  double condition_;
};

class RegressionProblem final : public Problem {
 public:
  RegressionProblem(std::size_t n_samples, std::size_t m, std::size_t n, double noise_level,
                    std::uint64_t seed) {
    if (n_samples == 0 || m == 0 || n == 0) throw std::invalid_argument("matrix_regression_problem: empty shape");
    if (!(noise_level >= 0.0)) throw std::invalid_argument("matrix_regression_problem: noise_level must be >= 0");
    std::mt19937_64 rng(mix_seed(seed, 3));
    x_ = gaussian_matrix(n_samples, m, 1.0, rng);
    w_true_ = gaussian_matrix(m, n, 1.0, rng);
    y_ = matmul(x_, w_true_);
    if (noise_level > 0.0) y_ += gaussian_matrix(n_samples, n, noise_level, rng);

    const SvdResult s = svd(x_);
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    lipschitz_ = s.singular_values.front() * s.singular_values.front() * inv_n;

    // Least-squares minimizer V diag(1/s) U^T Y over the numerical range of X.
    const double tol = rank_tolerance(s, x_.rows(), x_.cols());
    Matrix uty(s.singular_values.size(), n);
    for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
      if (s.singular_values[k] <= tol) continue;
      for (std::size_t i = 0; i < n_samples; ++i) {
        const double uik = s.u(i, k) / s.singular_values[k];
        for (std::size_t j = 0; j < n; ++j) uty(k, j) += uik * y_(i, j);
      }
    }
    w_star_ = matmul(s.v, uty);
    f_star_ = loss({w_star_});
  }

  std::string kind() const override { return "regression"; }

  std::vector<ParamBlock> blocks() const override {
    return {{"W", w_true_.rows(), w_true_.cols(), true}};
  }

  double loss(const Params& p) const override {
    check_shapes(p);
    Matrix r = matmul(x_, p[0]);
    r -= y_;
    const double nr = frobenius_norm(r);
    return 0.5 * nr * nr / static_cast<double>(x_.rows());
  }

  Params grad(const Params& p) const override {
    check_shapes(p);
    Matrix r = matmul(x_, p[0]);
    r -= y_;
    Matrix g = matmul(x_.transpose(), r);
    g *= 1.0 / static_cast<double>(x_.rows());
    return {std::move(g)};
  }

  Params initial_point(std::uint64_t) const override { return {Matrix(w_true_.rows(), w_true_.cols())}; }

  ProblemConstants constants() const override {
    ProblemConstants c;
    c.lipschitz_frobenius = lipschitz_;
    c.f_star = f_star_;
    c.w_star = Params{w_star_};
    return c;
  }

 private:
  Matrix x_, y_, w_true_, w_star_;
  double lipschitz_ = 0.0;
  double f_star_ = 0.0;
};

class MlpProblem final : public Problem {
 public:
  MlpProblem(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes,
             std::size_t n_samples, std::uint64_t seed)
      : d_(input_dim), h_(hidden_dim), c_(classes), labels_(n_samples) {
    if (input_dim == 0 || hidden_dim == 0 || n_samples == 0) {
      throw std::invalid_argument("tiny_mlp_problem: empty shape");
    }
    if (classes < 2) throw std::invalid_argument("tiny_mlp_problem: need at least 2 classes");
    std::mt19937_64 rng(mix_seed(seed, 4));
    const Matrix centers = gaussian_matrix(classes, input_dim, 0.5, rng);
    x_ = gaussian_matrix(n_samples, input_dim, 1.0, rng);
    for (std::size_t i = 0; i < n_samples; ++i) {
      labels_[i] = i % classes;
      for (std::size_t j = 0; j < input_dim; ++j) x_(i, j) += centers(labels_[i], j);
    }
  }

  std::string kind() const override { return "mlp"; }

  std::vector<ParamBlock> blocks() const override {
    return {{"W1", h_, d_, true}, {"W2", c_, h_, true}, {"b", c_, 1, false}};
  }

  double loss(const Params& p) const override {
    check_shapes(p);
    const Forward f = forward(p);
    return f.loss;
  }

  Params grad(const Params& p) const override {
    check_shapes(p);
    const Forward f = forward(p);
    const std::size_t n = x_.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix dlogits = f.probs;  // n x c
    for (std::size_t i = 0; i < n; ++i) dlogits(i, labels_[i]) -= 1.0;
    dlogits *= inv_n;

    Matrix gw2 = matmul(dlogits.transpose(), f.act);  // c x h
    Matrix gb(c_, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c_; ++k) gb(k, 0) += dlogits(i, k);

    Matrix dpre = matmul(dlogits, p[1]);  // n x h
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < h_; ++j) dpre(i, j) *= 2.0 * std::max(0.0, f.pre(i, j));
    Matrix gw1 = matmul(dpre.transpose(), x_);  // h x d
    return {std::move(gw1), std::move(gw2), std::move(gb)};
  }

  Params initial_point(std::uint64_t seed) const override {
    std::mt19937_64 rng(mix_seed(seed, 5));
    Matrix w1 = gaussian_matrix(h_, d_, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
    Matrix w2 = gaussian_matrix(c_, h_, 1.0 / std::sqrt(static_cast<double>(h_)), rng);
    return {std::move(w1), std::move(w2), Matrix(c_, 1)};
  }

 private:
  struct Forward {
    Matrix pre, act, probs;
    double loss = 0.0;
  };

  Forward forward(const Params& p) const {
    const std::size_t n = x_.rows();
    Forward f;
    f.pre = matmul_transposed(x_, p[0]);  // n x h
    f.act = f.pre;
    for (double& v : f.act.data()) v = v > 0.0 ? v * v : 0.0;
    f.probs = matmul_transposed(f.act, p[1]);  // logits, n x c
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = f.probs.row(i);
      for (std::size_t k = 0; k < c_; ++k) row[k] += p[2](k, 0);
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double& v : row) {
        v = std::exp(v - mx);
        z += v;
      }
      for (double& v : row) v /= z;
      total -= std::log(std::max(row[labels_[i]], 1e-300));
    }
    f.loss = total / static_cast<double>(n);
    return f;
  }

  std::size_t d_, h_, c_;
  Matrix x_;
  std::vector<std::size_t> labels_;
};

}  // namespace

void Problem::check_shapes(const Params& p) const {
  const auto b = blocks();
  if (p.size() != b.size()) throw std::invalid_argument(kind() + ": wrong number of parameter blocks");
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (p[i].rows() != b[i].rows || p[i].cols() != b[i].cols) {
      throw std::invalid_argument(kind() + ": block '" + b[i].name + "' has shape " +
                                  p[i].shape_string());
    }
  }
}

ProblemPtr quadratic_problem(std::size_t m, std::size_t n, double condition, std::uint64_t seed,
                             double init_scale) {
  return std::make_shared<QuadraticProblem>(m, n, condition, seed, init_scale);
}

ProblemPtr matrix_regression_problem(std::size_t n_samples, std::size_t m, std::size_t n,
                                     double noise_level, std::uint64_t seed) {
  return std::make_shared<RegressionProblem>(n_samples, m, n, noise_level, seed);
}

ProblemPtr tiny_mlp_problem(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes,
                            std::size_t n_samples, std::uint64_t seed) {
  return std::make_shared<MlpProblem>(input_dim, hidden_dim, classes, n_samples, seed);
}

NoiseOracle::NoiseOracle(double sigma, std::int64_t batch, std::uint64_t seed)
    : sigma_(sigma), batch_(batch), rng_(mix_seed(seed, 6)) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("NoiseOracle: sigma must be >= 0");
  if (batch < 1) throw std::invalid_argument("NoiseOracle: batch must be >= 1");
}

void NoiseOracle::perturb(Params& g) {
  if (sigma_ == 0.0) return;
  for (Matrix& block : g) {
    const double sd = sigma_ / std::sqrt(static_cast<double>(batch_) * static_cast<double>(block.size()));
    for (double& v : block.data()) v += sd * normal_(rng_);
  }
}

Params noisy_grad(const Problem& problem, const Params& p, NoiseOracle& oracle) {
  Params g = problem.grad(p);
  oracle.perturb(g);
  return g;
}

Params finite_difference_grad(const Problem& problem, const Params& p, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_grad: h must be > 0");
  Params work = p;
  Params out;
  for (std::size_t b = 0; b < p.size(); ++b) {
    Matrix g(p[b].rows(), p[b].cols());
    auto wd = work[b].data();
    auto gd = g.data();
    for (std::size_t k = 0; k < wd.size(); ++k) {
      const double orig = wd[k];
      wd[k] = orig + h;
      const double fp = problem.loss(work);
      wd[k] = orig - h;
      const double fm = problem.loss(work);
      wd[k] = orig;
      gd[k] = (fp - fm) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double gradient_check(const Problem& problem, const Params& p, double h) {
  const Params g = problem.grad(p);
  const Params fd = finite_difference_grad(problem, p, h);
  double diff2 = 0.0;
  for (std::size_t b = 0; b < g.size(); ++b) {
    const double d = frobenius_norm(g[b] - fd[b]);
    diff2 += d * d;
  }
  const double scale = std::max(params_frobenius_norm(g), params_frobenius_norm(fd));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff2) / scale;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  Matrix out(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data()) v = stddev * normal(rng);
  return out;
}

double params_frobenius_norm(const Params& p) {
  double acc = 0.0;
  for (const Matrix& m : p) {
    const double n = frobenius_norm(m);
    acc += n * n;
  }
  return std::sqrt(acc);
}

}  // namespace sfspec

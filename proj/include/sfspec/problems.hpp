#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sfspec/matrix.hpp"

namespace sfspec {

using Params = std::vector<Matrix>;

struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_matrix = true;
};

/// Analytic constants, present only where the objective makes them exact.
struct ProblemConstants {
  std::optional<double> lipschitz_frobenius;
  std::optional<double> f_star;
  std::optional<Params> w_star;
};

/// A smooth objective over a list of parameter blocks with exact gradients.
/// Immutable after construction.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string kind() const = 0;
  virtual std::vector<ParamBlock> blocks() const = 0;
  virtual double loss(const Params& p) const = 0;
  virtual Params grad(const Params& p) const = 0;
  /// Deterministic starting point for a given seed.
  virtual Params initial_point(std::uint64_t seed) const = 0;
  virtual ProblemConstants constants() const { return {}; }

  /// Throws std::invalid_argument if `p` does not match blocks().
  void check_shapes(const Params& p) const;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// f(W) = 1/2 ||A (W - W*)||_F^2 with A = diag(a), a log-spaced in
/// [1, condition]. L_F = condition^2 and f* = 0.
ProblemPtr quadratic_problem(std::size_t m, std::size_t n, double condition, std::uint64_t seed,
                             double init_scale = 1.0);

/// f(W) = 1/(2N) ||X W - Y||_F^2 with Gaussian X and Y = X W0 + noise_level E.
ProblemPtr matrix_regression_problem(std::size_t n_samples, std::size_t m, std::size_t n,
                                     double noise_level, std::uint64_t seed);

/// One hidden layer with squared-ReLU activation and softmax cross-entropy on
/// Gaussian clusters. Parameters: W1 (hidden x input), W2 (classes x hidden),
/// b (classes x 1, a vector block).
ProblemPtr tiny_mlp_problem(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes,
                            std::size_t n_samples, std::uint64_t seed);

/// Additive Gaussian gradient noise. Each block of size mn gets i.i.d. entries
/// with standard deviation sigma / sqrt(B mn), so E||noise||_F^2 = sigma^2 / B
/// per block.
class NoiseOracle {
 public:
  NoiseOracle(double sigma, std::int64_t batch, std::uint64_t seed);

  double sigma() const { return sigma_; }
  std::int64_t batch() const { return batch_; }

  /// Adds one draw of noise to each block of `g` in place.
  void perturb(Params& g);

 private:
  double sigma_;
  std::int64_t batch_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

Params noisy_grad(const Problem& problem, const Params& p, NoiseOracle& oracle);

/// Central finite-difference gradient with step h.
Params finite_difference_grad(const Problem& problem, const Params& p, double h = 1e-5);

/// ||g_fd - g||_F / max(||g||_F, ||g_fd||_F) over all blocks; 0 if both vanish.
double gradient_check(const Problem& problem, const Params& p, double h = 1e-5);

/// Seeded Gaussian matrix with entries of the given standard deviation.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

double params_frobenius_norm(const Params& p);

}  // namespace sfspec

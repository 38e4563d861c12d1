#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lbbart/matrix.hpp"
#include "lbbart/rng.hpp"
#include "lbbart/tree.hpp"

namespace lbbart {

struct InverseGammaPrior {
  double shape = 3.0;
  double scale = 1.0;
};

// y = sum of tree outputs + N(0, sigma2); leaf values ~ N(mu_mean, mu_var).
struct GaussianModel {
  double sigma2 = 1.0;
  double mu_mean = 0.0;
  double mu_var = 1.0;
  std::optional<InverseGammaPrior> sigma_prior;

  void validate() const;
};

// Leaf probabilities ~ Beta(alpha, beta).
struct BernoulliModel {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const;
};

// Per-leaf sufficient statistics. For binary responses `sum` is the success
// count.
struct LeafStats {
  std::size_t n = 0;
  double sum = 0.0;
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations from `mean`

  void add(double y);
};

// One entry per leaf, in `tree.leaves()` order.
std::vector<LeafStats> leaf_statistics(const Tree& tree, const Matrix& X, std::span<const double> y);
std::vector<LeafStats> leaf_statistics(const Tree& tree, std::span<const NodeId> assignment,
                                       std::span<const double> y);

double gaussian_leaf_log_marginal(const LeafStats& s, const GaussianModel& model);
double bernoulli_leaf_log_marginal(const LeafStats& s, const BernoulliModel& model);

/// Leaf-value-integrated log likelihood. Throws std::invalid_argument when a
/// leaf holds no observations.
double gaussian_log_marginal(const Tree& tree, std::span<const double> y, const Matrix& X,
                             const GaussianModel& model);
double bernoulli_log_marginal(const Tree& tree, std::span<const double> y, const Matrix& X,
                              const BernoulliModel& model);

// Conjugate posterior draws, one per leaf in `tree.leaves()` order.
std::vector<double> sample_leaf_values(const std::vector<LeafStats>& stats, const GaussianModel& model, Rng& rng);
std::vector<double> sample_leaf_values(const std::vector<LeafStats>& stats, const BernoulliModel& model, Rng& rng);
std::vector<double> sample_leaf_values(const Tree& tree, std::span<const double> y, const Matrix& X,
                                       const GaussianModel& model, Rng& rng);
std::vector<double> sample_leaf_values(const Tree& tree, std::span<const double> y, const Matrix& X,
                                       const BernoulliModel& model, Rng& rng);

// Draw from InverseGamma(shape + n/2, scale + ssr/2).
double sample_sigma2(double ssr, std::size_t n, const InverseGammaPrior& prior, Rng& rng);

/// Sigma^2 draw given the current sum of trees (leaf values stored in the
/// trees). Throws std::logic_error when the model has no variance prior.
double sample_sigma2(std::span<const Tree> trees, std::span<const double> y, const Matrix& X,
                     const GaussianModel& model, Rng& rng);

// KL divergence between N(mu1, sigma2) and N(mu2, sigma2).
double gaussian_kl(double mu1, double mu2, double sigma2);

double gaussian_log_likelihood(std::span<const double> fitted, std::span<const double> y, double sigma2);
double bernoulli_log_likelihood(std::span<const double> prob, std::span<const double> y);

// Number of rows where (prob > 0.5) disagrees with y.
std::size_t misclassified(std::span<const double> prob, std::span<const double> y);

// Default hyperparameters for a sum of `m` trees: leaf prior centred so the
// sum sits at the response mid-range with sd range / (2 k sqrt(m)); variance
// prior with shape 3 and 90% of its mass below the sample variance.
GaussianModel default_gaussian_model(std::span<const double> y, std::size_t m = 1, double k = 2.0);

}  // namespace lbbart

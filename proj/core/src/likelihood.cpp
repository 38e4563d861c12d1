#include "lbbart/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>

namespace lbbart {
namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

void require_nonempty(const LeafStats& s) {
  if (s.n == 0) throw std::invalid_argument("leaf holds no observations");
}

void check_sizes(const Matrix& X, std::span<const double> y) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y have different row counts");
}

}  // namespace

void GaussianModel::validate() const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian model: sigma2 must be > 0");
  if (!(mu_var > 0.0)) throw std::invalid_argument("gaussian model: mu_var must be > 0");
  if (!std::isfinite(mu_mean)) throw std::invalid_argument("gaussian model: mu_mean must be finite");
  if (sigma_prior && !(sigma_prior->shape > 0.0 && sigma_prior->scale > 0.0)) {
    throw std::invalid_argument("gaussian model: inverse-gamma shape and scale must be > 0");
  }
}

void BernoulliModel::validate() const {
  if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("bernoulli model: alpha and beta must be > 0");
}

void LeafStats::add(double y) {
  ++n;
  sum += y;
  const double d = y - mean;
  mean += d / static_cast<double>(n);
  ss += d * (y - mean);
}

std::vector<LeafStats> leaf_statistics(const Tree& tree, std::span<const NodeId> assignment,
                                       std::span<const double> y) {
  if (assignment.size() != y.size()) throw std::invalid_argument("assignment and y have different sizes");
  const auto leaves = tree.leaves();
  std::unordered_map<NodeId, std::size_t> slot;
  for (std::size_t k = 0; k < leaves.size(); ++k) slot.emplace(leaves[k], k);
  std::vector<LeafStats> stats(leaves.size());
  for (std::size_t i = 0; i < y.size(); ++i) stats[slot.at(assignment[i])].add(y[i]);
  return stats;
}

std::vector<LeafStats> leaf_statistics(const Tree& tree, const Matrix& X, std::span<const double> y) {
  check_sizes(X, y);
  const auto assignment = leaf_assignment(tree, X);
  return leaf_statistics(tree, assignment, y);
}

double gaussian_leaf_log_marginal(const LeafStats& s, const GaussianModel& model) {
  require_nonempty(s);
  const double n = static_cast<double>(s.n);
  const double s2 = model.sigma2;
  const double v = model.mu_var;
  const double dev = s.mean - model.mu_mean;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - 0.5 * std::log1p(n * v / s2) - s.ss / (2.0 * s2) -
         n * dev * dev / (2.0 * (s2 + n * v));
}

double bernoulli_leaf_log_marginal(const LeafStats& s, const BernoulliModel& model) {
  require_nonempty(s);
  const double n = static_cast<double>(s.n);
  return log_beta(model.alpha + s.sum, model.beta + n - s.sum) - log_beta(model.alpha, model.beta);
}

double gaussian_log_marginal(const Tree& tree, std::span<const double> y, const Matrix& X,
                             const GaussianModel& model) {
  model.validate();
  double total = 0.0;
  for (const auto& s : leaf_statistics(tree, X, y)) total += gaussian_leaf_log_marginal(s, model);
  return total;
}

double bernoulli_log_marginal(const Tree& tree, std::span<const double> y, const Matrix& X,
                              const BernoulliModel& model) {
  model.validate();
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("bernoulli model needs a 0/1 response");
  }
  double total = 0.0;
  for (const auto& s : leaf_statistics(tree, X, y)) total += bernoulli_leaf_log_marginal(s, model);
  return total;
}

std::vector<double> sample_leaf_values(const std::vector<LeafStats>& stats, const GaussianModel& model, Rng& rng) {
  std::vector<double> out;
  out.reserve(stats.size());
  for (const auto& s : stats) {
    require_nonempty(s);
    const double n = static_cast<double>(s.n);
    const double precision = 1.0 / model.mu_var + n / model.sigma2;
    const double mean = (model.mu_mean / model.mu_var + n * s.mean / model.sigma2) / precision;
    out.push_back(mean + standard_normal(rng) / std::sqrt(precision));
  }
  return out;
}

std::vector<double> sample_leaf_values(const std::vector<LeafStats>& stats, const BernoulliModel& model, Rng& rng) {
  std::vector<double> out;
  out.reserve(stats.size());
  for (const auto& s : stats) {
    require_nonempty(s);
    out.push_back(beta_draw(rng, model.alpha + s.sum, model.beta + static_cast<double>(s.n) - s.sum));
  }
  return out;
}

std::vector<double> sample_leaf_values(const Tree& tree, std::span<const double> y, const Matrix& X,
                                       const GaussianModel& model, Rng& rng) {
  model.validate();
  return sample_leaf_values(leaf_statistics(tree, X, y), model, rng);
}

std::vector<double> sample_leaf_values(const Tree& tree, std::span<const double> y, const Matrix& X,
                                       const BernoulliModel& model, Rng& rng) {
  model.validate();
  return sample_leaf_values(leaf_statistics(tree, X, y), model, rng);
}

double sample_sigma2(double ssr, std::size_t n, const InverseGammaPrior& prior, Rng& rng) {
  if (!(ssr >= 0.0)) throw std::invalid_argument("sample_sigma2: ssr must be >= 0");
  const double shape = prior.shape + 0.5 * static_cast<double>(n);
  const double rate = prior.scale + 0.5 * ssr;
  return 1.0 / gamma_draw(rng, shape, 1.0 / rate);
}

double sample_sigma2(std::span<const Tree> trees, std::span<const double> y, const Matrix& X,
                     const GaussianModel& model, Rng& rng) {
  if (!model.sigma_prior) throw std::logic_error("sample_sigma2: model has no inverse-gamma prior");
  check_sizes(X, y);
  double ssr = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double fit = 0.0;
    for (const auto& t : trees) fit += t.evaluate(X.row(i));
    const double r = y[i] - fit;
    ssr += r * r;
  }
  return sample_sigma2(ssr, y.size(), *model.sigma_prior, rng);
}

double gaussian_kl(double mu1, double mu2, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian_kl: sigma2 must be > 0");
  const double d = mu1 - mu2;
  return d * d / (2.0 * sigma2);
}

double gaussian_log_likelihood(std::span<const double> fitted, std::span<const double> y, double sigma2) {
  if (fitted.size() != y.size()) throw std::invalid_argument("fitted and y have different sizes");
  double ssr = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ssr += (y[i] - fitted[i]) * (y[i] - fitted[i]);
  const double n = static_cast<double>(y.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) - ssr / (2.0 * sigma2);
}

double bernoulli_log_likelihood(std::span<const double> prob, std::span<const double> y) {
  if (prob.size() != y.size()) throw std::invalid_argument("prob and y have different sizes");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += y[i] > 0.5 ? std::log(prob[i]) : std::log1p(-prob[i]);
  return total;
}

std::size_t misclassified(std::span<const double> prob, std::span<const double> y) {
  if (prob.size() != y.size()) throw std::invalid_argument("prob and y have different sizes");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < y.size(); ++i) wrong += (prob[i] > 0.5) != (y[i] > 0.5);
  return wrong;
}

GaussianModel default_gaussian_model(std::span<const double> y, std::size_t m, double k) {
  if (y.empty()) throw std::invalid_argument("default_gaussian_model: empty response");
  if (m == 0 || !(k > 0.0)) throw std::invalid_argument("default_gaussian_model: m and k must be positive");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  double range = *hi - *lo;
  if (range <= 0.0) range = 1.0;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var = y.size() > 1 ? var / static_cast<double>(y.size() - 1) : 0.0;
  if (!(var > 0.0)) var = 1.0;

  GaussianModel model;
  const double sd = range / (2.0 * k * std::sqrt(static_cast<double>(m)));
  model.mu_mean = 0.5 * (*lo + *hi) / static_cast<double>(m);
  model.mu_var = sd * sd;
  model.sigma2 = var;
  InverseGammaPrior ig;
  ig.scale = var * boost::math::gamma_p_inv(ig.shape, 0.1);
  model.sigma_prior = ig;
  return model;
}

}  // namespace lbbart

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "lbbart/likelihood.hpp"
#include "oracles.hpp"

using namespace lbbart;

namespace {

LeafStats stats_of(const std::vector<double>& y) {
  LeafStats s;
  for (double v : y) s.add(v);
  return s;
}

// Mean and standard error of the mean.
std::pair<double, double> moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / (n - 1) / n)};
}

}  // namespace

TEST(LeafStats, WelfordMatchesTwoPass) {
  const std::vector<double> y{1.0, 2.5, -0.5, 4.0};
  const LeafStats s = stats_of(y);
  EXPECT_EQ(s.n, 4u);
  EXPECT_DOUBLE_EQ(s.sum, 7.0);
  EXPECT_DOUBLE_EQ(s.mean, 1.75);
  EXPECT_NEAR(s.ss, 0.5625 + 0.5625 + 5.0625 + 5.0625, 1e-12);
}

TEST(Marginal, GaussianMatchesQuadrature) {
  const std::vector<std::vector<double>> cases{{0.3}, {1.0, 2.0}, {-1.2, 0.4, 2.2}, {5, 5.1, 4.9, 5.3, 4.8, 5.0}};
  for (const auto& y : cases) {
    for (auto [s2, m, v] : {std::tuple{1.0, 0.0, 1.0}, {0.25, 3.0, 0.1}, {2.0, -1.0, 4.0}}) {
      const double got = gaussian_leaf_log_marginal(stats_of(y), GaussianModel{s2, m, v, std::nullopt});
      const double quad = oracle::gaussian_leaf_log_marginal_quadrature(y, s2, m, v);
      EXPECT_LT(std::abs(std::exp(got - quad) - 1.0), 1e-6);
      EXPECT_NEAR(got, oracle::gaussian_leaf_log_marginal_mvn(y, s2, m, v), 1e-10);
    }
  }
}

TEST(Marginal, BernoulliMatchesQuadrature) {
  const std::vector<std::vector<double>> cases{{1}, {0, 1}, {1, 1, 0}, {0, 0, 0, 0, 1, 1}};
  for (const auto& y : cases) {
    for (auto [a, b] : {std::pair{1.0, 1.0}, {0.5, 0.5}, {2.0, 5.0}}) {
      const double got = bernoulli_leaf_log_marginal(stats_of(y), BernoulliModel{a, b});
      const double quad = oracle::bernoulli_leaf_log_marginal_quadrature(y, a, b);
      EXPECT_LT(std::abs(std::exp(got - quad) - 1.0), 1e-6) << a << " " << b;
    }
  }
}

TEST(Marginal, TreeSumsLeaves) {
  Tree t;
  t.grow(Tree::root(), {0, 0.5});
  const Matrix X{{0.1}, {0.2}, {0.7}};
  const std::vector<double> y{1.0, 1.5, 4.0};
  const GaussianModel m{0.5, 2.0, 1.0, std::nullopt};
  const double expect = oracle::gaussian_leaf_log_marginal_mvn({1.0, 1.5}, 0.5, 2.0, 1.0) +
                        oracle::gaussian_leaf_log_marginal_mvn({4.0}, 0.5, 2.0, 1.0);
  EXPECT_NEAR(gaussian_log_marginal(t, y, X, m), expect, 1e-12);
  t.grow(t.leaves().back(), {0, 0.9});
  EXPECT_THROW(gaussian_log_marginal(t, y, X, m), std::invalid_argument);
}

TEST(Marginal, BernoulliRejectsNonBinary) {
  const Tree t;
  const Matrix X{{0.1}, {0.2}};
  EXPECT_THROW(bernoulli_log_marginal(t, std::vector<double>{0.0, 0.5}, X, BernoulliModel{}), std::invalid_argument);
}

TEST(Conjugacy, GaussianLeafDrawMoments) {
  const std::vector<double> y{0.5, 1.5, 2.0};
  const GaussianModel m{0.8, 0.0, 2.0, std::nullopt};
  const double n = 3, post_var = 1.0 / (n / m.sigma2 + 1.0 / m.mu_var);
  const double post_mean = post_var * (4.0 / m.sigma2 + m.mu_mean / m.mu_var);
  Rng rng = make_stream(21, 0);
  std::vector<double> draws, sq;
  const std::vector<LeafStats> stats{stats_of(y)};
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_leaf_values(stats, m, rng)[0];
    draws.push_back(v);
    sq.push_back((v - post_mean) * (v - post_mean));
  }
  const auto [mean, se] = moments(draws);
  EXPECT_NEAR(mean, post_mean, 3 * se);
  const auto [var, se2] = moments(sq);
  EXPECT_NEAR(var, post_var, 3 * se2);
}

TEST(Conjugacy, BernoulliLeafDrawMoments) {
  const std::vector<double> y{1, 1, 0, 1};
  const BernoulliModel m{2.0, 3.0};
  const double a = 2 + 3, b = 3 + 1;
  const double mean_exact = a / (a + b), var_exact = a * b / ((a + b) * (a + b) * (a + b + 1));
  Rng rng = make_stream(22, 0);
  std::vector<double> draws, sq;
  const std::vector<LeafStats> stats{stats_of(y)};
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_leaf_values(stats, m, rng)[0];
    draws.push_back(v);
    sq.push_back((v - mean_exact) * (v - mean_exact));
  }
  const auto [mean, se] = moments(draws);
  EXPECT_NEAR(mean, mean_exact, 3 * se);
  const auto [var, se2] = moments(sq);
  EXPECT_NEAR(var, var_exact, 3 * se2);
}

TEST(Conjugacy, Sigma2DrawMoments) {
  const InverseGammaPrior prior{3.0, 1.0};
  const double ssr = 6.0;
  const std::size_t n = 10;
  const double a = prior.shape + n / 2.0, b = prior.scale + ssr / 2.0;
  const double mean_exact = b / (a - 1), var_exact = b * b / ((a - 1) * (a - 1) * (a - 2));
  Rng rng = make_stream(23, 0);
  std::vector<double> draws, sq;
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_sigma2(ssr, n, prior, rng);
    draws.push_back(v);
    sq.push_back((v - mean_exact) * (v - mean_exact));
  }
  const auto [mean, se] = moments(draws);
  EXPECT_NEAR(mean, mean_exact, 3 * se);
  const auto [var, se2] = moments(sq);
  EXPECT_NEAR(var, var_exact, 3 * se2);
}

TEST(Conjugacy, Sigma2NeedsPrior) {
  const std::vector<Tree> trees(1);
  const Matrix X{{0.1}};
  Rng rng = make_stream(1, 0);
  EXPECT_THROW(sample_sigma2(trees, std::vector<double>{1.0}, X, GaussianModel{}, rng), std::logic_error);
}

TEST(Likelihood, PointwiseHelpers) {
  EXPECT_DOUBLE_EQ(gaussian_kl(1.0, 3.0, 2.0), 1.0);
  const std::vector<double> prob{0.9, 0.2, 0.5, 0.7}, y{1, 1, 1, 0};
  EXPECT_EQ(misclassified(prob, y), 3u);
  EXPECT_NEAR(bernoulli_log_likelihood(prob, y), std::log(0.9) + std::log(0.2) + std::log(0.5) + std::log(0.3), 1e-14);
  const std::vector<double> fit{0.0}, obs{1.0};
  EXPECT_NEAR(gaussian_log_likelihood(fit, obs, 1.0), -0.5 * std::log(2 * M_PI) - 0.5, 1e-14);
}

TEST(Likelihood, DefaultModel) {
  const std::vector<double> y{1.0, 3.0, 5.0, 2.0};
  const GaussianModel m1 = default_gaussian_model(y, 1, 2.0);
  EXPECT_DOUBLE_EQ(m1.mu_mean, 3.0);
  EXPECT_DOUBLE_EQ(m1.mu_var, 1.0);  // sd = 4 / (2 * 2)
  ASSERT_TRUE(m1.sigma_prior.has_value());
  EXPECT_DOUBLE_EQ(m1.sigma_prior->shape, 3.0);
  const GaussianModel m4 = default_gaussian_model(y, 4, 2.0);
  EXPECT_DOUBLE_EQ(m4.mu_mean, 0.75);
  EXPECT_DOUBLE_EQ(m4.mu_var, 0.25);
  // 90% of the variance prior lies below the sample variance.
  const double var = m1.sigma2;
  const double b = m1.sigma_prior->scale;
  Rng rng = make_stream(3, 0);
  int below = 0;
  for (int i = 0; i < 20000; ++i) below += 1.0 / gamma_draw(rng, 3.0, 1.0 / b) < var;
  EXPECT_NEAR(below / 20000.0, 0.9, 0.01);
}

TEST(Models, Validation) {
  EXPECT_THROW((GaussianModel{-1.0, 0.0, 1.0, std::nullopt}.validate()), std::invalid_argument);
  EXPECT_THROW((GaussianModel{1.0, 0.0, 0.0, std::nullopt}.validate()), std::invalid_argument);
  EXPECT_THROW((BernoulliModel{0.0, 1.0}.validate()), std::invalid_argument);
}

#pragma once

// Brute-force reference computations. Nothing here calls the library's
// counting, prior, rule-prior, or marginal-likelihood code; trees are only
// used as containers.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lbbart/matrix.hpp"
#include "lbbart/tree.hpp"

namespace oracle {

// Every binary tree shape with `n_leaves` leaves, as strings over
// "L" | "(" left right ")".
std::vector<std::string> enumerate_shapes(unsigned n_leaves);

// Builds a tree with the given shape; rules are left at their defaults.
lbbart::Tree tree_from_shape(const std::string& shape);

// |left leaves - right leaves| at the root, and depth, read off the string.
int shape_delta(const std::string& shape);
int shape_depth(const std::string& shape);
int shape_leaves(const std::string& shape);

// Loss-based prior of one shape from direct sums: geometric leaf law,
// exp(-gamma delta) normalized over the deltas seen among enumerated shapes,
// then uniform over the enumerated shapes with that (n, delta).
double lb_shape_probability(const std::string& shape, double omega, double gamma);

// Classic prior of one shape by walking the nodes.
double cl_shape_probability(const std::string& shape, double alpha, double beta);

// E(delta) under LB(omega, gamma), summing leaf counts up to n_max with the
// conditional delta law normalized by explicit summation.
double brute_expected_delta(double omega, double gamma, unsigned n_max);

// Leaf log marginals by numerical integration over the leaf parameter.
double gaussian_leaf_log_marginal_quadrature(const std::vector<double>& y, double sigma2, double mu_mean,
                                         double mu_var);
double bernoulli_leaf_log_marginal_quadrature(const std::vector<double>& y, double alpha, double beta);

// Gaussian leaf log marginal through the multivariate normal form
// y ~ N(m 1, s2 I + v 1 1'), via Sherman-Morrison.
double gaussian_leaf_log_marginal_mvn(const std::vector<double>& y, double sigma2, double mu_mean, double mu_var);

struct MicroProblem {
  lbbart::Matrix X;
  std::vector<double> y;
  bool gaussian = true;
  double sigma2 = 1.0, mu_mean = 0.0, mu_var = 1.0;  // gaussian
  double a = 1.0, b = 1.0;                           // bernoulli
  bool loss_based = true;
  double omega = 1.561, gamma = 0.629;  // LB
  double alpha = 0.95, beta = 2.0;      // CL
  std::size_t min_obs = 1;
  unsigned max_leaves = 2;
};

// Shape string of a tree (rules dropped).
std::string shape_of(const lbbart::Tree& tree);

// Exact posterior over every tree (topology plus observed-value rules) with
// at most max_leaves leaves, keyed by Tree::to_string().
std::map<std::string, double> exact_posterior(const MicroProblem& problem);

// Thresholds at a node (observed values keeping min_obs rows on each side),
// found by trying every value.
std::vector<double> brute_thresholds(const lbbart::Matrix& X, const std::vector<std::size_t>& rows,
                                     std::size_t predictor, std::size_t min_obs);

double total_variation(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

}  // namespace oracle

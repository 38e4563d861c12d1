#pragma once

#include <cstddef>
#include <string>
#include <variant>

#include <boost/multiprecision/cpp_int.hpp>

#include "lbbart/rng.hpp"
#include "lbbart/tree.hpp"

namespace lbbart {

using BigInt = boost::multiprecision::cpp_int;

// Classic node-splitting prior: a node at depth d splits with probability
// alpha * (1 + d)^(-beta).
struct ClassicPrior {
  double alpha = 0.95;
  double beta = 2.0;

  void validate() const;
  double split_probability(int depth) const;
};

// Loss-based prior, pi(T) proportional to exp(-omega * n_L - gamma * delta).
struct LossBasedPrior {
  double omega = 1.561;
  double gamma = 0.629;

  void validate() const;
};

using PriorSpec = std::variant<ClassicPrior, LossBasedPrior>;

std::string describe(const PriorSpec& prior);

/// Log of the classic prior over internal nodes a(T) and leaves b(T):
/// sum_a log p(d) + sum_b log(1 - p(d)).
double cl_log_prior(const Tree& tree, const ClassicPrior& params);

/// Number of binary tree shapes with `n` leaves (the (n-1)-th Catalan number).
BigInt catalan(unsigned n);

/// Number of shapes with `n_leaves` leaves whose root subtrees differ in leaf
/// count by `delta`. (1, 0) counts the single-leaf tree.
/// Throws std::invalid_argument on parity or range violations.
BigInt count_trees(unsigned n_leaves, unsigned delta);

double log_catalan(unsigned n);
double log_count_trees(unsigned n_leaves, unsigned delta);

// True when (n_leaves, delta) is a reachable combination.
bool admissible(unsigned n_leaves, unsigned delta);

/// Log pmf of the leaf count: a geometric law on {1, 2, ...} with success
/// probability 1 - exp(-omega).
double lb_nl_log_pmf(unsigned n_leaves, const LossBasedPrior& params);

/// Log pmf of delta given n_leaves, proportional to exp(-gamma * delta) over
/// the admissible deltas. The single-leaf tree is a point mass at delta = 0.
/// Throws std::domain_error for gamma = 0 and std::invalid_argument for an
/// inadmissible (n_leaves, delta).
double lb_delta_log_pmf(unsigned delta, unsigned n_leaves, const LossBasedPrior& params);

/// Log normalizer of the delta conditional, log sum_delta exp(-gamma delta).
double lb_delta_log_normalizer(unsigned n_leaves, double gamma);

/// log pi(T) = log pi(n_L) + log pi(delta | n_L) - log N(n_L, delta).
double lb_log_prior(const TreeStats& stats, const LossBasedPrior& params);

// Topology log prior for either family.
double log_prior(const Tree& tree, const PriorSpec& prior);

// Uniform draw among the count_trees(n_leaves, delta) shapes. Rules are left
// at their defaults.
Tree sample_uniform_shape(unsigned n_leaves, unsigned delta, Rng& rng);

// Uniform draw among all catalan(n_leaves) shapes.
Tree sample_uniform_shape(unsigned n_leaves, Rng& rng);

// Rule-free topology drawn from the prior. Draws with more than `max_leaves`
// leaves are rejected and redrawn.
Tree sample_tree_topology(const PriorSpec& prior, Rng& rng, unsigned max_leaves = 2048);

}  // namespace lbbart

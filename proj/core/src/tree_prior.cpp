#include "lbbart/tree_prior.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace lbbart {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log sum_{k=0}^{terms-1} exp(k * log_ratio), stable for either sign.
double log_geometric_sum(double log_ratio, unsigned terms) {
  if (terms == 0) return kNegInf;
  const double t = static_cast<double>(terms);
  if (log_ratio == 0.0) return std::log(t);
  if (log_ratio < 0.0) {
    return std::log(-std::expm1(t * log_ratio)) - std::log(-std::expm1(log_ratio));
  }
  return (t - 1.0) * log_ratio + std::log(-std::expm1(-t * log_ratio)) -
         std::log(-std::expm1(-log_ratio));
}

unsigned min_delta(unsigned n_leaves) { return (n_leaves >= 3 && n_leaves % 2 == 1) ? 1u : 0u; }

// Number of admissible deltas for n_leaves >= 2: delta = parity, parity + 2, ..., n - 2.
unsigned delta_support_size(unsigned n_leaves) { return (n_leaves - 2) / 2 + 1; }

void check_admissible(unsigned n_leaves, unsigned delta) {
  if (!admissible(n_leaves, delta)) {
    throw std::invalid_argument("inadmissible (n_leaves, delta) = (" + std::to_string(n_leaves) +
                                ", " + std::to_string(delta) + ")");
  }
}

// Builds a uniformly random shape with `n` leaves under `leaf`.
void grow_uniform(Tree& tree, NodeId leaf, unsigned n, Rng& rng) {
  if (n <= 1) return;
  // Left subtree size k with probability C(k) C(n - k) / C(n).
  const double log_total = log_catalan(n);
  double u = uniform01(rng);
  unsigned k = 1;
  for (; k < n - 1; ++k) {
    const double w = std::exp(log_catalan(k) + log_catalan(n - k) - log_total);
    if (u < w) break;
    u -= w;
  }
  tree.grow(leaf, SplitRule{});
  const auto& node = tree.node(leaf);
  const NodeId left = node.left;
  const NodeId right = node.right;
  grow_uniform(tree, left, k, rng);
  grow_uniform(tree, right, n - k, rng);
}

Tree sample_classic(const ClassicPrior& prior, Rng& rng, unsigned max_leaves) {
  for (;;) {
    Tree tree;
    std::deque<NodeId> frontier{Tree::root()};
    bool overflow = false;
    while (!frontier.empty()) {
      const NodeId id = frontier.front();
      frontier.pop_front();
      if (uniform01(rng) < prior.split_probability(tree.node(id).depth)) {
        if (static_cast<unsigned>(tree.n_leaves()) + 1 > max_leaves) {
          overflow = true;
          break;
        }
        tree.grow(id, SplitRule{});
        frontier.push_back(tree.node(id).left);
        frontier.push_back(tree.node(id).right);
      }
    }
    if (!overflow) return tree;
  }
}

Tree sample_loss_based(const LossBasedPrior& prior, Rng& rng, unsigned max_leaves) {
  const double p = -std::expm1(-prior.omega);
  std::geometric_distribution<unsigned> leaves_minus_one(p);
  unsigned n = 0;
  do {
    n = leaves_minus_one(rng) + 1;
  } while (n > max_leaves);

  unsigned delta = 0;
  if (n >= 3) {
    const unsigned terms = delta_support_size(n);
    double u = uniform01(rng);
    unsigned k = 0;
    for (; k + 1 < terms; ++k) {
      const double w = std::exp(lb_delta_log_pmf(min_delta(n) + 2 * k, n, prior));
      if (u < w) break;
      u -= w;
    }
    delta = min_delta(n) + 2 * k;
  }
  return sample_uniform_shape(n, delta, rng);
}

}  // namespace

void ClassicPrior::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("classic prior: alpha must lie in (0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("classic prior: beta must be >= 0");
}

double ClassicPrior::split_probability(int depth) const {
  return alpha * std::pow(1.0 + depth, -beta);
}

void LossBasedPrior::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw std::invalid_argument("loss-based prior: omega must be > 0");
  if (gamma == 0.0) throw std::domain_error("loss-based prior: gamma = 0 gives an improper delta distribution");
  if (!std::isfinite(gamma)) throw std::invalid_argument("loss-based prior: gamma must be finite");
}

std::string describe(const PriorSpec& prior) {
  char buf[96];
  if (const auto* cl = std::get_if<ClassicPrior>(&prior)) {
    std::snprintf(buf, sizeof buf, "CL(alpha=%g, beta=%g)", cl->alpha, cl->beta);
  } else {
    const auto& lb = std::get<LossBasedPrior>(prior);
    std::snprintf(buf, sizeof buf, "LB(omega=%g, gamma=%g)", lb.omega, lb.gamma);
  }
  return buf;
}

double cl_log_prior(const Tree& tree, const ClassicPrior& params) {
  params.validate();
  double total = 0.0;
  std::vector<NodeId> stack{Tree::root()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const auto& n = tree.node(id);
    const double log_split = std::log(params.alpha) - params.beta * std::log1p(static_cast<double>(n.depth));
    if (n.is_leaf()) {
      total += std::log(-std::expm1(log_split));
    } else {
      total += log_split;
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return total;
}

BigInt catalan(unsigned n) {
  if (n == 0) throw std::invalid_argument("catalan: n must be >= 1");
  static std::mutex mutex;
  static std::vector<BigInt> table{BigInt(0), BigInt(1)};
  std::lock_guard lock(mutex);
  // C(n) = sum_{k=1}^{n-1} C(k) C(n-k) for n >= 2.
  while (table.size() <= n) {
    const std::size_t m = table.size();
    BigInt sum = 0;
    for (std::size_t k = 1; k < m; ++k) sum += table[k] * table[m - k];
    table.push_back(sum);
  }
  return table[n];
}

bool admissible(unsigned n_leaves, unsigned delta) {
  if (n_leaves == 0) return false;
  if (n_leaves == 1) return delta == 0;
  return delta <= n_leaves - 2 && (delta % 2) == (n_leaves % 2);
}

BigInt count_trees(unsigned n_leaves, unsigned delta) {
  check_admissible(n_leaves, delta);
  if (n_leaves == 1) return 1;
  const unsigned small = (n_leaves - delta) / 2;
  const unsigned large = (n_leaves + delta) / 2;
  if (delta == 0) return catalan(small) * catalan(small);
  return 2 * catalan(small) * catalan(large);
}

double log_catalan(unsigned n) {
  if (n == 0) throw std::invalid_argument("log_catalan: n must be >= 1");
  // C(n) = (2(n-1))! / (n! (n-1)!)
  const double m = static_cast<double>(n);
  return std::lgamma(2.0 * m - 1.0) - std::lgamma(m + 1.0) - std::lgamma(m);
}

double log_count_trees(unsigned n_leaves, unsigned delta) {
  check_admissible(n_leaves, delta);
  if (n_leaves == 1) return 0.0;
  const unsigned small = (n_leaves - delta) / 2;
  const unsigned large = (n_leaves + delta) / 2;
  if (delta == 0) return 2.0 * log_catalan(small);
  return std::log(2.0) + log_catalan(small) + log_catalan(large);
}

double lb_nl_log_pmf(unsigned n_leaves, const LossBasedPrior& params) {
  if (n_leaves == 0) throw std::invalid_argument("lb_nl_log_pmf: n_leaves must be >= 1");
  if (!(params.omega > 0.0)) throw std::invalid_argument("lb_nl_log_pmf: omega must be > 0");
  // exp(-omega n)(exp(omega) - 1) = exp(-omega (n - 1)) (1 - exp(-omega))
  return -params.omega * (static_cast<double>(n_leaves) - 1.0) + std::log(-std::expm1(-params.omega));
}

double lb_delta_log_normalizer(unsigned n_leaves, double gamma) {
  if (gamma == 0.0) throw std::domain_error("delta distribution is improper for gamma = 0");
  if (n_leaves == 0) throw std::invalid_argument("n_leaves must be >= 1");
  if (n_leaves == 1) return 0.0;
  const unsigned d0 = min_delta(n_leaves);
  return -gamma * d0 + log_geometric_sum(-2.0 * gamma, delta_support_size(n_leaves));
}

double lb_delta_log_pmf(unsigned delta, unsigned n_leaves, const LossBasedPrior& params) {
  if (params.gamma == 0.0) throw std::domain_error("delta distribution is improper for gamma = 0");
  check_admissible(n_leaves, delta);
  if (n_leaves == 1) return 0.0;
  return -params.gamma * delta - lb_delta_log_normalizer(n_leaves, params.gamma);
}

double lb_log_prior(const TreeStats& stats, const LossBasedPrior& params) {
  const auto n = static_cast<unsigned>(stats.n_leaves);
  const auto d = static_cast<unsigned>(stats.delta);
  return lb_nl_log_pmf(n, params) + lb_delta_log_pmf(d, n, params) - log_count_trees(n, d);
}

double log_prior(const Tree& tree, const PriorSpec& prior) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ClassicPrior>) {
          return cl_log_prior(tree, p);
        } else {
          return lb_log_prior(tree.stats(), p);
        }
      },
      prior);
}

Tree sample_uniform_shape(unsigned n_leaves, unsigned delta, Rng& rng) {
  check_admissible(n_leaves, delta);
  Tree tree;
  if (n_leaves == 1) return tree;
  unsigned left = (n_leaves + delta) / 2;
  unsigned right = (n_leaves - delta) / 2;
  // The two mirror solutions are equally likely; they coincide when delta = 0.
  if (delta != 0 && uniform01(rng) < 0.5) std::swap(left, right);
  tree.grow(Tree::root(), SplitRule{});
  const NodeId l = tree.node(Tree::root()).left;
  const NodeId r = tree.node(Tree::root()).right;
  grow_uniform(tree, l, left, rng);
  grow_uniform(tree, r, right, rng);
  return tree;
}

Tree sample_uniform_shape(unsigned n_leaves, Rng& rng) {
  if (n_leaves == 0) throw std::invalid_argument("sample_uniform_shape: n_leaves must be >= 1");
  Tree tree;
  grow_uniform(tree, Tree::root(), n_leaves, rng);
  return tree;
}

Tree sample_tree_topology(const PriorSpec& prior, Rng& rng, unsigned max_leaves) {
  if (max_leaves < 1) throw std::invalid_argument("sample_tree_topology: max_leaves must be >= 1");
  return std::visit(
      [&](const auto& p) -> Tree {
        p.validate();
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ClassicPrior>) {
          return sample_classic(p, rng, max_leaves);
        } else {
          return sample_loss_based(p, rng, max_leaves);
        }
      },
      prior);
}

}  // namespace lbbart

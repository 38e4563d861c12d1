#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lbbart/matrix.hpp"
#include "lbbart/rng.hpp"
#include "lbbart/tree.hpp"

namespace lbbart {

// kObserved: thresholds are the distinct observed values of the predictor
// at the node. kContinuous: thresholds are uniform on the interval that keeps
// both children populated.
enum class SplitValueMode { kObserved, kContinuous };

std::string_view to_string(SplitValueMode mode);
SplitValueMode split_value_mode_from_string(std::string_view name);

struct RuleSpace {
  std::size_t min_obs = 1;
  SplitValueMode mode = SplitValueMode::kObserved;
};

// Rules usable at one node: those leaving at least min_obs rows on each side.
// The rule prior picks a predictor uniformly among `predictors`, then a
// threshold uniformly among its options.
class NodeRules {
 public:
  NodeRules(const Matrix& X, std::span<const std::size_t> rows, const RuleSpace& space);

  bool empty() const { return predictors_.empty(); }
  std::span<const std::size_t> predictors() const { return predictors_; }

  SplitRule draw(Rng& rng) const;
  // Log prior density of `rule`; -inf when the rule is not available here.
  double log_density(const SplitRule& rule) const;

 private:
  struct Options {
    std::vector<double> thresholds;  // kObserved, ascending
    double lo = 0.0;                 // kContinuous: [lo, hi)
    double hi = 0.0;
  };

  SplitValueMode mode_;
  std::vector<std::size_t> predictors_;
  std::vector<Options> options_;  // parallel to predictors_
};

// Rule drawn from the prior at a node holding `rows`, or nullopt when no rule
// leaves min_obs rows on both sides.
std::optional<SplitRule> draw_rule(const Matrix& X, std::span<const std::size_t> rows, const RuleSpace& space,
                                   Rng& rng);

double rule_log_density(const Matrix& X, std::span<const std::size_t> rows, const SplitRule& rule,
                        const RuleSpace& space);

/// Sum of rule log prior densities over the internal nodes of the subtree
/// rooted at `id`, each evaluated on the rows reaching that node.
double subtree_rule_log_prior(const Tree& tree, const Matrix& X, NodeId id, const RuleSpace& space);

// Subtree rule log prior given the rows reaching `id`.
double subtree_rule_log_prior(const Tree& tree, const Matrix& X, NodeId id, std::span<const std::size_t> rows,
                              const RuleSpace& space);

}  // namespace lbbart

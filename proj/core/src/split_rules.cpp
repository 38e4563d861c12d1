#include "lbbart/split_rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lbbart {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(SplitValueMode mode) {
  return mode == SplitValueMode::kObserved ? "observed" : "continuous";
}

SplitValueMode split_value_mode_from_string(std::string_view name) {
  if (name == "observed" || name == "discrete") return SplitValueMode::kObserved;
  if (name == "continuous") return SplitValueMode::kContinuous;
  throw std::invalid_argument("unknown split value mode: " + std::string(name));
}

NodeRules::NodeRules(const Matrix& X, std::span<const std::size_t> rows, const RuleSpace& space)
    : mode_(space.mode) {
  if (space.min_obs < 1) throw std::invalid_argument("min_obs must be >= 1");
  const std::size_t n = rows.size();
  const std::size_t m = space.min_obs;
  if (n < 2 * m) return;

  std::vector<double> values(n);
  for (std::size_t j = 0; j < X.cols(); ++j) {
    for (std::size_t i = 0; i < n; ++i) values[i] = X(rows[i], j);
    std::sort(values.begin(), values.end());
    Options opt;
    if (mode_ == SplitValueMode::kObserved) {
      // Threshold v sends rows <= v left; v must close a run of ties.
      for (std::size_t i = m - 1; i + m < n; ++i) {
        if (values[i] < values[i + 1]) opt.thresholds.push_back(values[i]);
      }
      if (opt.thresholds.empty()) continue;
    } else {
      opt.lo = values[m - 1];
      opt.hi = values[n - m];
      if (!(opt.lo < opt.hi)) continue;
    }
    predictors_.push_back(j);
    options_.push_back(std::move(opt));
  }
}

SplitRule NodeRules::draw(Rng& rng) const {
  if (empty()) throw std::logic_error("no split rule is available at this node");
  const std::size_t k = uniform_index(rng, predictors_.size());
  const auto& opt = options_[k];
  SplitRule rule;
  rule.predictor = predictors_[k];
  if (mode_ == SplitValueMode::kObserved) {
    rule.threshold = opt.thresholds[uniform_index(rng, opt.thresholds.size())];
  } else {
    double t;
    do {
      t = opt.lo + (opt.hi - opt.lo) * uniform01(rng);
    } while (!(t < opt.hi));
    rule.threshold = t;
  }
  return rule;
}

double NodeRules::log_density(const SplitRule& rule) const {
  const auto it = std::lower_bound(predictors_.begin(), predictors_.end(), rule.predictor);
  if (it == predictors_.end() || *it != rule.predictor) return kNegInf;
  const auto& opt = options_[static_cast<std::size_t>(it - predictors_.begin())];
  const double log_pick = -std::log(static_cast<double>(predictors_.size()));
  if (mode_ == SplitValueMode::kObserved) {
    if (!std::binary_search(opt.thresholds.begin(), opt.thresholds.end(), rule.threshold)) return kNegInf;
    return log_pick - std::log(static_cast<double>(opt.thresholds.size()));
  }
  if (!(rule.threshold >= opt.lo && rule.threshold < opt.hi)) return kNegInf;
  return log_pick - std::log(opt.hi - opt.lo);
}

std::optional<SplitRule> draw_rule(const Matrix& X, std::span<const std::size_t> rows, const RuleSpace& space,
                                   Rng& rng) {
  NodeRules rules(X, rows, space);
  if (rules.empty()) return std::nullopt;
  return rules.draw(rng);
}

double rule_log_density(const Matrix& X, std::span<const std::size_t> rows, const SplitRule& rule,
                        const RuleSpace& space) {
  return NodeRules(X, rows, space).log_density(rule);
}

double subtree_rule_log_prior(const Tree& tree, const Matrix& X, NodeId id, std::span<const std::size_t> rows,
                              const RuleSpace& space) {
  const auto& node = tree.node(id);
  if (node.is_leaf()) return 0.0;
  const double here = rule_log_density(X, rows, node.rule, space);
  if (here == kNegInf) return kNegInf;
  std::vector<std::size_t> left, right;
  for (std::size_t r : rows) (node.rule.goes_left(X.row(r)) ? left : right).push_back(r);
  const double l = subtree_rule_log_prior(tree, X, node.left, left, space);
  if (l == kNegInf) return kNegInf;
  return here + l + subtree_rule_log_prior(tree, X, node.right, right, space);
}

double subtree_rule_log_prior(const Tree& tree, const Matrix& X, NodeId id, const RuleSpace& space) {
  const auto rows = observations_at(tree, X, id);
  return subtree_rule_log_prior(tree, X, id, rows, space);
}

}  // namespace lbbart

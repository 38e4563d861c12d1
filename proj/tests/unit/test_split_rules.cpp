#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "lbbart/split_rules.hpp"
#include "oracles.hpp"

using namespace lbbart;

namespace {

const Matrix kX{{0.1, 0.5}, {0.2, 0.5}, {0.2, 0.5}, {0.6, 0.5}, {0.9, 0.5}};
const std::vector<std::size_t> kAll{0, 1, 2, 3, 4};

}  // namespace

TEST(SplitRules, ObservedThresholdsMatchBruteForce) {
  for (std::size_t m : {1u, 2u, 3u}) {
    const NodeRules rules(kX, kAll, RuleSpace{m, SplitValueMode::kObserved});
    const auto expect = oracle::brute_thresholds(kX, kAll, 0, m);
    if (expect.empty()) {
      EXPECT_TRUE(rules.empty());
      continue;
    }
    ASSERT_EQ(rules.predictors().size(), 1u);  // column 1 is constant
    for (double t : expect) EXPECT_NEAR(rules.log_density({0, t}), -std::log(double(expect.size())), 1e-14);
    EXPECT_EQ(rules.log_density({0, 0.9}), -INFINITY);
    EXPECT_EQ(rules.log_density({1, 0.5}), -INFINITY);
  }
  EXPECT_EQ(oracle::brute_thresholds(kX, kAll, 0, 1), (std::vector<double>{0.1, 0.2, 0.6}));
  EXPECT_EQ(oracle::brute_thresholds(kX, kAll, 0, 2), (std::vector<double>{0.2}));
  EXPECT_TRUE(oracle::brute_thresholds(kX, kAll, 0, 3).empty());
}

TEST(SplitRules, ObservedDrawsAreUniform) {
  const NodeRules rules(kX, kAll, RuleSpace{1, SplitValueMode::kObserved});
  Rng rng = make_stream(31, 0);
  std::map<double, int> hits;
  for (int i = 0; i < 30000; ++i) {
    const SplitRule r = rules.draw(rng);
    ASSERT_EQ(r.predictor, 0u);
    ++hits[r.threshold];
  }
  ASSERT_EQ(hits.size(), 3u);
  for (const auto& [t, c] : hits) EXPECT_NEAR(c / 30000.0, 1.0 / 3, 0.015) << t;
}

TEST(SplitRules, ContinuousInterval) {
  const NodeRules rules(kX, kAll, RuleSpace{2, SplitValueMode::kContinuous});
  // Sorted column 0: 0.1 0.2 0.2 0.6 0.9; with two rows each side, [0.2, 0.6).
  EXPECT_NEAR(rules.log_density({0, 0.3}), -std::log(0.4), 1e-12);
  EXPECT_EQ(rules.log_density({0, 0.61}), -INFINITY);
  EXPECT_EQ(rules.log_density({0, 0.19}), -INFINITY);
  Rng rng = make_stream(32, 0);
  for (int i = 0; i < 1000; ++i) {
    const SplitRule r = rules.draw(rng);
    ASSERT_GE(r.threshold, 0.2);
    ASSERT_LT(r.threshold, 0.6);
  }
}

TEST(SplitRules, NoRulesWhenTooFewRows) {
  const std::vector<std::size_t> two{0, 3};
  Rng rng = make_stream(33, 0);
  EXPECT_FALSE(draw_rule(kX, two, RuleSpace{2, SplitValueMode::kObserved}, rng).has_value());
  EXPECT_TRUE(draw_rule(kX, two, RuleSpace{1, SplitValueMode::kObserved}, rng).has_value());
}

TEST(SplitRules, SubtreePriorSumsNodes) {
  const Matrix X{{0.1, 0.1}, {0.2, 0.9}, {0.8, 0.3}, {0.9, 0.8}};
  Tree t;
  t.grow(Tree::root(), {0, 0.2});
  t.grow(t.node(Tree::root()).right, {1, 0.3});
  const RuleSpace space{1, SplitValueMode::kObserved};
  // Root: both predictors usable, three thresholds each. Right child rows
  // {2, 3}: one threshold per predictor.
  const double expect = -std::log(2.0) - std::log(3.0) - std::log(2.0) - std::log(1.0);
  EXPECT_NEAR(subtree_rule_log_prior(t, X, Tree::root(), space), expect, 1e-12);
  EXPECT_NEAR(subtree_rule_log_prior(t, X, t.node(Tree::root()).right, space), -std::log(2.0), 1e-12);
}

TEST(SplitRules, ModeNames) {
  EXPECT_EQ(split_value_mode_from_string("observed"), SplitValueMode::kObserved);
  EXPECT_EQ(split_value_mode_from_string("discrete"), SplitValueMode::kObserved);
  EXPECT_EQ(split_value_mode_from_string("continuous"), SplitValueMode::kContinuous);
  EXPECT_THROW(split_value_mode_from_string("quantile"), std::invalid_argument);
}

#include <gtest/gtest.h>

#include "lbbart/rng.hpp"
#include "lbbart/tree.hpp"
#include "oracles.hpp"

using namespace lbbart;

namespace {

// (x0<=0.5 (x1<=0.3 L L) L)
Tree three_leaf_tree() {
  Tree t;
  t.grow(Tree::root(), {0, 0.5});
  t.grow(t.node(Tree::root()).left, {1, 0.3});
  return t;
}

}  // namespace

TEST(Tree, SingleLeafStats) {
  Tree t(2.5);
  EXPECT_EQ(t.stats(), (TreeStats{1, 0, 0}));
  EXPECT_EQ(t.leaves().size(), 1u);
  EXPECT_TRUE(t.internal_nodes().empty());
  EXPECT_DOUBLE_EQ(t.evaluate(std::vector<double>{0.1}), 2.5);
  EXPECT_EQ(t.to_string(), "L");
}

TEST(Tree, GrowUpdatesStats) {
  const Tree t = three_leaf_tree();
  EXPECT_EQ(t.stats(), (TreeStats{3, 1, 2}));
  EXPECT_EQ(t.stats(), compute_stats(t));
  EXPECT_EQ(t.to_string(), "(x0<=0.5 (x1<=0.29999999999999999 L L) L)");
  EXPECT_EQ(t.prunable_nodes().size(), 1u);
  EXPECT_EQ(t.swappable_pairs().size(), 1u);
}

TEST(Tree, GrowOnInternalNodeThrows) {
  Tree t = three_leaf_tree();
  EXPECT_THROW(t.grow(Tree::root(), {0, 0.1}), std::invalid_argument);
  EXPECT_THROW(t.prune(Tree::root()), std::invalid_argument);
  EXPECT_THROW(t.change_rule(t.leaves().front(), {0, 0.1}), std::invalid_argument);
}

TEST(Tree, RoutingFollowsLessOrEqual) {
  Tree t = three_leaf_tree();
  t.set_leaf_values(std::vector<double>{1.0, 3.0, 5.0});
  EXPECT_DOUBLE_EQ(t.evaluate(std::vector<double>{0.5, 0.3}), 1.0);
  EXPECT_DOUBLE_EQ(t.evaluate(std::vector<double>{0.5, 0.31}), 3.0);
  EXPECT_DOUBLE_EQ(t.evaluate(std::vector<double>{0.51, 0.0}), 5.0);
  EXPECT_THROW(evaluate(t, std::vector<double>{0.1}), std::invalid_argument);
}

TEST(Tree, PruneRestoresSingleLeaf) {
  Tree t = three_leaf_tree();
  t.prune(t.node(Tree::root()).left);
  t.prune(Tree::root());
  EXPECT_EQ(t.stats(), (TreeStats{1, 0, 0}));
  EXPECT_TRUE(t.same_structure(Tree{}));
}

TEST(Tree, SwapExchangesRules) {
  Tree t = three_leaf_tree();
  const NodeId child = t.node(Tree::root()).left;
  t.swap_rules(Tree::root(), child);
  EXPECT_EQ(t.node(Tree::root()).rule, (SplitRule{1, 0.3}));
  EXPECT_EQ(t.node(child).rule, (SplitRule{0, 0.5}));
  EXPECT_EQ(t.stats(), compute_stats(t));
}

TEST(Tree, ApplyMoveLeavesOriginalUntouched) {
  const Tree t = three_leaf_tree();
  const NodeId right = t.node(Tree::root()).right;
  auto [grown, stats] = apply_move(t, Move{MoveKind::kGrow, right, kNoNode, {1, 0.7}});
  EXPECT_EQ(stats, (TreeStats{4, 0, 2}));
  EXPECT_EQ(t.n_leaves(), 3);
  EXPECT_THROW(apply_move(t, Move{MoveKind::kPrune, Tree::root(), kNoNode, {}}), std::invalid_argument);
}

TEST(Tree, MoveKindNamesRoundTrip) {
  for (auto k : {MoveKind::kGrow, MoveKind::kPrune, MoveKind::kSwap, MoveKind::kChange})
    EXPECT_EQ(move_kind_from_string(to_string(k)), k);
  EXPECT_THROW(move_kind_from_string("JUMP"), std::invalid_argument);
}

TEST(Tree, LeafCountsAndValidity) {
  const Tree t = three_leaf_tree();
  const Matrix X{{0.1, 0.1}, {0.2, 0.9}, {0.9, 0.5}, {0.8, 0.1}};
  EXPECT_EQ(leaf_counts(t, X), (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_TRUE(is_valid(t, X, 1));
  EXPECT_FALSE(is_valid(t, X, 2));
  EXPECT_EQ(observations_at(t, X, Tree::root()).size(), 4u);
  EXPECT_EQ(observations_at(t, X, t.node(Tree::root()).right), (std::vector<std::size_t>{2, 3}));
  const auto sizes = cell_sizes(t, X);
  EXPECT_DOUBLE_EQ(sizes[2], 0.5);
}

TEST(Tree, PartitionRegionsMatchRouting) {
  const Tree t = three_leaf_tree();
  const Matrix X{{0.1, 0.1}, {0.2, 0.9}, {0.9, 0.5}};
  const auto cells = partition(t, X);
  ASSERT_EQ(cells.regions.size(), 3u);
  EXPECT_DOUBLE_EQ(cells.regions[0].upper[0], 0.5);
  EXPECT_DOUBLE_EQ(cells.regions[0].upper[1], 0.3);
  EXPECT_DOUBLE_EQ(cells.regions[1].lower[1], 0.3);
  EXPECT_DOUBLE_EQ(cells.regions[2].lower[0], 0.5);
  EXPECT_EQ(cells.assignment, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Tree, DeltaIsRootSubtreeImbalance) {
  for (unsigned n = 1; n <= 7; ++n) {
    for (const auto& shape : oracle::enumerate_shapes(n)) {
      const Tree t = oracle::tree_from_shape(shape);
      const TreeStats expect{oracle::shape_leaves(shape), oracle::shape_delta(shape), oracle::shape_depth(shape)};
      ASSERT_EQ(t.stats(), expect) << shape;
      ASSERT_EQ(compute_stats(t), expect) << shape;
    }
  }
}

// Random GROW / PRUNE / SWAP / CHANGE sequences keep the cached statistics
// equal to a full recomputation.
TEST(TreeProperty, IncrementalStatsMatchRecomputation) {
  Rng rng = make_stream(7, 0);
  for (int seq = 0; seq < 2000; ++seq) {
    Tree t;
    for (int step = 0; step < 40; ++step) {
      const int kind = static_cast<int>(uniform_index(rng, 4));
      const auto leaves = t.leaves();
      if (kind == 0 || t.n_leaves() == 1) {
        t.grow(leaves[uniform_index(rng, leaves.size())], {uniform_index(rng, 3), uniform01(rng)});
      } else if (kind == 1) {
        const auto p = t.prunable_nodes();
        t.prune(p[uniform_index(rng, p.size())]);
      } else if (kind == 2) {
        const auto s = t.swappable_pairs();
        if (!s.empty()) {
          const auto [a, b] = s[uniform_index(rng, s.size())];
          t.swap_rules(a, b);
        }
      } else {
        const auto in = t.internal_nodes();
        t.change_rule(in[uniform_index(rng, in.size())], {0, uniform01(rng)});
      }
      ASSERT_EQ(t.stats(), compute_stats(t));
    }
  }
}

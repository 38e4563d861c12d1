#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lbbart/matrix.hpp"

namespace lbbart {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

// Axis-aligned split `x[predictor] <= threshold`; observations meeting the
// rule go to the left child.
struct SplitRule {
  std::size_t predictor = 0;
  double threshold = 0.0;

  bool goes_left(std::span<const double> x) const { return x[predictor] <= threshold; }
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

// Topology summary used by the tree priors. `delta` is the absolute
// difference between the leaf counts of the root's two subtrees.
struct TreeStats {
  int n_leaves = 1;
  int delta = 0;
  int depth = 0;

  friend bool operator==(const TreeStats&, const TreeStats&) = default;
};

enum class MoveKind { kGrow, kPrune, kSwap, kChange };

std::string_view to_string(MoveKind kind);
MoveKind move_kind_from_string(std::string_view name);

// GROW targets a leaf, PRUNE an internal node whose children are both
// leaves, SWAP a parent (`node`) and one of its internal children (`child`),
// CHANGE any internal node. `rule` is used by GROW and CHANGE.
struct Move {
  MoveKind kind = MoveKind::kGrow;
  NodeId node = kNoNode;
  NodeId child = kNoNode;
  SplitRule rule{};
};

class Tree {
 public:
  struct Node {
    NodeId parent = kNoNode;
    NodeId left = kNoNode;
    NodeId right = kNoNode;
    SplitRule rule{};
    double value = 0.0;
    int depth = 0;

    bool is_leaf() const { return left == kNoNode; }
  };

  explicit Tree(double root_value = 0.0);

  static constexpr NodeId root() { return 0; }

  const Node& node(NodeId id) const;
  bool is_leaf(NodeId id) const { return node(id).is_leaf(); }
  bool contains(NodeId id) const;

  // Cached statistics, kept current by the mutators below.
  const TreeStats& stats() const { return stats_; }
  int n_leaves() const { return stats_.n_leaves; }

  // Leaves in left-to-right order; `internal_nodes` in preorder.
  std::vector<NodeId> leaves() const;
  std::vector<NodeId> internal_nodes() const;
  // Internal nodes whose two children are leaves.
  std::vector<NodeId> prunable_nodes() const;
  // (parent, child) pairs of internal nodes, preorder by parent then left/right.
  std::vector<std::pair<NodeId, NodeId>> swappable_pairs() const;
  // Internal node ids on the path from the root down to `id`, excluding `id`.
  std::vector<NodeId> ancestors(NodeId id) const;

  void grow(NodeId leaf, SplitRule rule);
  void prune(NodeId id);
  void swap_rules(NodeId parent, NodeId child);
  void change_rule(NodeId id, SplitRule rule);
  void set_value(NodeId leaf, double value);
  // Assigns leaf values in `leaves()` order.
  void set_leaf_values(std::span<const double> values);
  std::vector<double> leaf_values() const;

  NodeId find_leaf(std::span<const double> x) const;
  double evaluate(std::span<const double> x) const;

  // Canonical preorder text form, e.g. "(x0<=0.5 (x1<=0.5 L L) L)".
  std::string to_string(bool with_values = false) const;

  // Equal topology and rules (values ignored); independent of slot layout.
  bool same_structure(const Tree& other) const;
  friend bool operator==(const Tree& a, const Tree& b);

 private:
  NodeId allocate(NodeId parent, int depth, double value);
  void release(NodeId id);
  int root_side(NodeId id) const;
  void refresh_derived_stats();
  void check_live(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<char> live_;
  std::vector<NodeId> free_;
  TreeStats stats_{};
  int side_leaves_[2] = {0, 0};
  std::vector<int> leaves_at_depth_{1};
};

// Leaf value reached by routing x; throws std::invalid_argument when a rule on
// the path references a predictor outside x.
double evaluate(const Tree& tree, std::span<const double> x);

// (n_leaves, delta, depth) recomputed by traversal, ignoring the cache.
TreeStats compute_stats(const Tree& tree);

// Leaf id reached by each row of X.
std::vector<NodeId> leaf_assignment(const Tree& tree, const Matrix& X);

// Observation counts per leaf, in `tree.leaves()` order.
std::vector<std::size_t> leaf_counts(const Tree& tree, const Matrix& X);

// Fraction of rows falling in each leaf cell, in `tree.leaves()` order.
std::vector<double> cell_sizes(const Tree& tree, const Matrix& X);

// Every leaf holds at least `min_obs` rows of X.
bool is_valid(const Tree& tree, const Matrix& X, std::size_t min_obs = 1);

// Row indices of X whose path passes through `id`.
std::vector<std::size_t> observations_at(const Tree& tree, const Matrix& X, NodeId id);
std::vector<std::size_t> observations_at(const Tree& tree, const Matrix& X, NodeId id,
                                         std::span<const std::size_t> candidates);

struct Region {
  NodeId leaf = kNoNode;
  // Cell is {x : lower[j] < x[j] <= upper[j]} intersected with [0,1]^p.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct CellPartition {
  std::vector<Region> regions;         // one per leaf, `tree.leaves()` order
  std::vector<std::size_t> assignment;  // row -> index into regions
};

CellPartition partition(const Tree& tree, const Matrix& X);

// Applies `move` to a copy of `tree`. Throws std::invalid_argument when the
// move does not fit the targeted node(s).
std::pair<Tree, TreeStats> apply_move(const Tree& tree, const Move& move);

}  // namespace lbbart

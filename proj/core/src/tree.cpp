#include "lbbart/tree.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>

namespace lbbart {

std::string_view to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::kGrow: return "GROW";
    case MoveKind::kPrune: return "PRUNE";
    case MoveKind::kSwap: return "SWAP";
    case MoveKind::kChange: return "CHANGE";
  }
  return "?";
}

MoveKind move_kind_from_string(std::string_view name) {
  if (name == "GROW") return MoveKind::kGrow;
  if (name == "PRUNE") return MoveKind::kPrune;
  if (name == "SWAP") return MoveKind::kSwap;
  if (name == "CHANGE") return MoveKind::kChange;
  throw std::invalid_argument("unknown move kind: " + std::string(name));
}

Tree::Tree(double root_value) {
  nodes_.push_back(Node{});
  nodes_[0].value = root_value;
  live_.push_back(1);
}

const Tree::Node& Tree::node(NodeId id) const {
  check_live(id);
  return nodes_[static_cast<std::size_t>(id)];
}

bool Tree::contains(NodeId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < nodes_.size() && live_[id];
}

void Tree::check_live(NodeId id) const {
  if (!contains(id)) throw std::invalid_argument("Tree: node " + std::to_string(id) + " does not exist");
}

NodeId Tree::allocate(NodeId parent, int depth, double value) {
  Node n;
  n.parent = parent;
  n.depth = depth;
  n.value = value;
  if (!free_.empty()) {
    // Reuse the lowest free slot so layouts stay deterministic.
    auto it = std::min_element(free_.begin(), free_.end());
    const NodeId id = *it;
    free_.erase(it);
    nodes_[id] = n;
    live_[id] = 1;
    return id;
  }
  nodes_.push_back(n);
  live_.push_back(1);
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tree::release(NodeId id) {
  live_[id] = 0;
  free_.push_back(id);
}

int Tree::root_side(NodeId id) const {
  NodeId cur = id;
  while (nodes_[cur].parent != root()) cur = nodes_[cur].parent;
  return cur == nodes_[root()].left ? 0 : 1;
}

void Tree::refresh_derived_stats() {
  while (leaves_at_depth_.size() > 1 && leaves_at_depth_.back() == 0) leaves_at_depth_.pop_back();
  stats_.depth = static_cast<int>(leaves_at_depth_.size()) - 1;
  stats_.delta = std::abs(side_leaves_[0] - side_leaves_[1]);
}

std::vector<NodeId> Tree::leaves() const {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(stats_.n_leaves));
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (n.is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::vector<NodeId> Tree::internal_nodes() const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (!n.is_leaf()) {
      out.push_back(id);
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::vector<NodeId> Tree::prunable_nodes() const {
  std::vector<NodeId> out;
  for (NodeId id : internal_nodes()) {
    const Node& n = nodes_[id];
    if (nodes_[n.left].is_leaf() && nodes_[n.right].is_leaf()) out.push_back(id);
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> Tree::swappable_pairs() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId id : internal_nodes()) {
    const Node& n = nodes_[id];
    if (!nodes_[n.left].is_leaf()) out.emplace_back(id, n.left);
    if (!nodes_[n.right].is_leaf()) out.emplace_back(id, n.right);
  }
  return out;
}

std::vector<NodeId> Tree::ancestors(NodeId id) const {
  check_live(id);
  std::vector<NodeId> path;
  for (NodeId cur = nodes_[id].parent; cur != kNoNode; cur = nodes_[cur].parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

void Tree::grow(NodeId leaf, SplitRule rule) {
  check_live(leaf);
  if (!nodes_[leaf].is_leaf()) throw std::invalid_argument("GROW target is not a leaf");
  const int d = nodes_[leaf].depth;
  const double v = nodes_[leaf].value;
  const NodeId l = allocate(leaf, d + 1, v);
  const NodeId r = allocate(leaf, d + 1, v);
  Node& n = nodes_[leaf];
  n.left = l;
  n.right = r;
  n.rule = rule;

  stats_.n_leaves += 1;
  if (leaves_at_depth_.size() <= static_cast<std::size_t>(d + 1)) leaves_at_depth_.resize(d + 2, 0);
  leaves_at_depth_[d] -= 1;
  leaves_at_depth_[d + 1] += 2;
  if (leaf == root()) {
    side_leaves_[0] = 1;
    side_leaves_[1] = 1;
  } else {
    side_leaves_[root_side(leaf)] += 1;
  }
  refresh_derived_stats();
}

void Tree::prune(NodeId id) {
  check_live(id);
  Node& n = nodes_[id];
  if (n.is_leaf()) throw std::invalid_argument("PRUNE target is a leaf");
  if (!nodes_[n.left].is_leaf() || !nodes_[n.right].is_leaf()) {
    throw std::invalid_argument("PRUNE target must have two leaf children");
  }
  const int d = n.depth;
  n.value = nodes_[n.left].value;
  release(n.left);
  release(n.right);
  n.left = kNoNode;
  n.right = kNoNode;
  n.rule = SplitRule{};

  stats_.n_leaves -= 1;
  leaves_at_depth_[d + 1] -= 2;
  leaves_at_depth_[d] += 1;
  if (id == root()) {
    side_leaves_[0] = 0;
    side_leaves_[1] = 0;
  } else {
    side_leaves_[root_side(id)] -= 1;
  }
  refresh_derived_stats();
}

void Tree::swap_rules(NodeId parent, NodeId child) {
  check_live(parent);
  check_live(child);
  if (nodes_[child].parent != parent) throw std::invalid_argument("SWAP nodes are not parent and child");
  if (nodes_[parent].is_leaf() || nodes_[child].is_leaf()) {
    throw std::invalid_argument("SWAP requires two internal nodes");
  }
  std::swap(nodes_[parent].rule, nodes_[child].rule);
}

void Tree::change_rule(NodeId id, SplitRule rule) {
  check_live(id);
  if (nodes_[id].is_leaf()) throw std::invalid_argument("CHANGE target is a leaf");
  nodes_[id].rule = rule;
}

void Tree::set_value(NodeId leaf, double value) {
  check_live(leaf);
  nodes_[leaf].value = value;
}

void Tree::set_leaf_values(std::span<const double> values) {
  const auto ids = leaves();
  if (values.size() != ids.size()) throw std::invalid_argument("set_leaf_values: size mismatch");
  for (std::size_t k = 0; k < ids.size(); ++k) nodes_[ids[k]].value = values[k];
}

std::vector<double> Tree::leaf_values() const {
  std::vector<double> out;
  for (NodeId id : leaves()) out.push_back(nodes_[id].value);
  return out;
}

NodeId Tree::find_leaf(std::span<const double> x) const {
  NodeId cur = root();
  while (!nodes_[cur].is_leaf()) {
    const Node& n = nodes_[cur];
    if (n.rule.predictor >= x.size()) {
      throw std::invalid_argument("covariate vector has " + std::to_string(x.size()) +
                                  " entries but a rule uses predictor " +
                                  std::to_string(n.rule.predictor));
    }
    cur = n.rule.goes_left(x) ? n.left : n.right;
  }
  return cur;
}

double Tree::evaluate(std::span<const double> x) const { return nodes_[find_leaf(x)].value; }

std::string Tree::to_string(bool with_values) const {
  std::string out;
  char buf[64];
  std::function<void(NodeId)> emit = [&](NodeId id) {
    const Node& n = nodes_[id];
    if (n.is_leaf()) {
      if (with_values) {
        std::snprintf(buf, sizeof buf, "L[%.17g]", n.value);
        out += buf;
      } else {
        out += 'L';
      }
      return;
    }
    std::snprintf(buf, sizeof buf, "(x%zu<=%.17g ", n.rule.predictor, n.rule.threshold);
    out += buf;
    emit(n.left);
    out += ' ';
    emit(n.right);
    out += ')';
  };
  emit(root());
  return out;
}

bool Tree::same_structure(const Tree& other) const {
  std::function<bool(NodeId, NodeId)> eq = [&](NodeId a, NodeId b) {
    const Node& x = nodes_[a];
    const Node& y = other.nodes_[b];
    if (x.is_leaf() != y.is_leaf()) return false;
    if (x.is_leaf()) return true;
    return x.rule == y.rule && eq(x.left, y.left) && eq(x.right, y.right);
  };
  return eq(root(), other.root());
}

bool operator==(const Tree& a, const Tree& b) {
  return a.same_structure(b) && a.leaf_values() == b.leaf_values();
}

double evaluate(const Tree& tree, std::span<const double> x) { return tree.evaluate(x); }

TreeStats compute_stats(const Tree& tree) {
  std::function<int(NodeId)> count = [&](NodeId id) -> int {
    const auto& n = tree.node(id);
    return n.is_leaf() ? 1 : count(n.left) + count(n.right);
  };
  std::function<int(NodeId)> height = [&](NodeId id) -> int {
    const auto& n = tree.node(id);
    return n.is_leaf() ? 0 : 1 + std::max(height(n.left), height(n.right));
  };
  const auto& root = tree.node(Tree::root());
  if (root.is_leaf()) return TreeStats{1, 0, 0};
  const int l = count(root.left);
  const int r = count(root.right);
  return TreeStats{l + r, std::abs(l - r), height(Tree::root())};
}

std::vector<NodeId> leaf_assignment(const Tree& tree, const Matrix& X) {
  std::vector<NodeId> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = tree.find_leaf(X.row(i));
  return out;
}

std::vector<std::size_t> leaf_counts(const Tree& tree, const Matrix& X) {
  const auto ids = tree.leaves();
  std::vector<std::size_t> slot_to_pos;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (slot_to_pos.size() <= static_cast<std::size_t>(ids[k])) slot_to_pos.resize(ids[k] + 1);
    slot_to_pos[ids[k]] = k;
  }
  std::vector<std::size_t> counts(ids.size(), 0);
  for (std::size_t i = 0; i < X.rows(); ++i) ++counts[slot_to_pos[tree.find_leaf(X.row(i))]];
  return counts;
}

std::vector<double> cell_sizes(const Tree& tree, const Matrix& X) {
  const auto counts = leaf_counts(tree, X);
  std::vector<double> out(counts.size(), 0.0);
  if (X.rows() == 0) return out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out[k] = static_cast<double>(counts[k]) / static_cast<double>(X.rows());
  }
  return out;
}

bool is_valid(const Tree& tree, const Matrix& X, std::size_t min_obs) {
  for (std::size_t c : leaf_counts(tree, X)) {
    if (c < min_obs) return false;
  }
  return true;
}

std::vector<std::size_t> observations_at(const Tree& tree, const Matrix& X, NodeId id,
                                         std::span<const std::size_t> candidates) {
  const auto path = tree.ancestors(id);
  // Direction taken out of each ancestor on the way to `id`.
  std::vector<bool> go_left(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    const NodeId next = k + 1 < path.size() ? path[k + 1] : id;
    go_left[k] = tree.node(path[k]).left == next;
  }
  std::vector<std::size_t> out;
  out.reserve(candidates.size());
  for (std::size_t i : candidates) {
    const auto x = X.row(i);
    bool reaches = true;
    for (std::size_t k = 0; k < path.size() && reaches; ++k) {
      reaches = tree.node(path[k]).rule.goes_left(x) == go_left[k];
    }
    if (reaches) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> observations_at(const Tree& tree, const Matrix& X, NodeId id) {
  std::vector<std::size_t> all(X.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return observations_at(tree, X, id, all);
}

CellPartition partition(const Tree& tree, const Matrix& X) {
  const std::size_t p = X.cols();
  CellPartition out;
  std::vector<std::size_t> slot_to_region;
  std::function<void(NodeId, std::vector<double>, std::vector<double>)> walk =
      [&](NodeId id, std::vector<double> lo, std::vector<double> hi) {
        const auto& n = tree.node(id);
        if (n.is_leaf()) {
          if (slot_to_region.size() <= static_cast<std::size_t>(id)) slot_to_region.resize(id + 1);
          slot_to_region[id] = out.regions.size();
          out.regions.push_back(Region{id, std::move(lo), std::move(hi)});
          return;
        }
        const std::size_t j = n.rule.predictor;
        if (j >= p) throw std::invalid_argument("partition: rule predictor outside covariate range");
        auto left_hi = hi;
        left_hi[j] = std::min(left_hi[j], n.rule.threshold);
        auto right_lo = lo;
        right_lo[j] = std::max(right_lo[j], n.rule.threshold);
        walk(n.left, lo, std::move(left_hi));
        walk(n.right, std::move(right_lo), std::move(hi));
      };
  // Lower bounds start just below 0 so that x = 0 belongs to the closed cube.
  walk(Tree::root(), std::vector<double>(p, -std::numeric_limits<double>::min()),
       std::vector<double>(p, 1.0));
  out.assignment.resize(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    out.assignment[i] = slot_to_region[tree.find_leaf(X.row(i))];
  }
  return out;
}

std::pair<Tree, TreeStats> apply_move(const Tree& tree, const Move& move) {
  Tree out = tree;
  switch (move.kind) {
    case MoveKind::kGrow:
      out.grow(move.node, move.rule);
      break;
    case MoveKind::kPrune:
      out.prune(move.node);
      break;
    case MoveKind::kSwap:
      out.swap_rules(move.node, move.child);
      break;
    case MoveKind::kChange:
      out.change_rule(move.node, move.rule);
      break;
  }
  TreeStats stats = out.stats();
  return {std::move(out), stats};
}

}  // namespace lbbart

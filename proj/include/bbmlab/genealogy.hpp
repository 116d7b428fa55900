#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "bbmlab/errors.hpp"
#include "bbmlab/point_measure.hpp"

namespace bbmlab {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct NodeRecord {
  NodeId parent = kNoNode;
  double birth_time = 0.0;
  // Branch time of an internal node; NaN for leaves (alive at the horizon
  // or removed by barrier pruning).
  double branch_time = std::numeric_limits<double>::quiet_NaN();
  bool has_branch() const { return !std::isnan(branch_time); }
};

// Binary branching history up to an observation horizon. Node ids are dense
// integers in birth order (the root is 0), so parent < child always.
// Historical cross-sections are derived: a node is alive at s iff
// birth_time <= s < branch_time (or the horizon, for leaves).
class GenealogyTree {
 public:
  std::vector<NodeRecord> nodes;
  double horizon = 0.0;
  // Height h_t(x) for every leaf alive at the horizon. Barrier-pruned nodes
  // are childless but carry no height.
  std::unordered_map<NodeId, double> leaf_heights;

  bool is_node(NodeId x) const {
    return x >= 0 && static_cast<std::size_t>(x) < nodes.size();
  }
  void require_node(NodeId x) const {
    if (!is_node(x)) throw input_error("unknown node id");
  }
  bool is_alive_leaf(NodeId x) const {
    return leaf_heights.find(x) != leaf_heights.end();
  }

  // End of a node's lifetime: its branch time, or the horizon for leaves.
  double end_time(NodeId x) const {
    const auto& n = nodes[static_cast<std::size_t>(x)];
    return n.has_branch() ? n.branch_time : horizon;
  }

  // Deepest ancestor of x (possibly x itself) alive at time s.
  NodeId ancestor_at(NodeId x, double s) const {
    require_node(x);
    if (s < 0.0) s = 0.0;
    while (nodes[static_cast<std::size_t>(x)].birth_time > s)
      x = nodes[static_cast<std::size_t>(x)].parent;
    return x;
  }

  std::vector<NodeId> alive_leaves() const {
    std::vector<NodeId> out;
    out.reserve(leaf_heights.size());
    for (const auto& [id, h] : leaf_heights) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }
};

// Largest s such that x and y have a common ancestor alive at s. For x == y
// this is the end of x's own lifetime.
inline double mrca_time(const GenealogyTree& tree, NodeId x, NodeId y) {
  tree.require_node(x);
  tree.require_node(y);
  if (x == y) return tree.end_time(x);
  // Climb the deeper node (ids are in birth order) until the lines meet.
  while (x != y) {
    if (x > y)
      x = tree.nodes[static_cast<std::size_t>(x)].parent;
    else
      y = tree.nodes[static_cast<std::size_t>(y)].parent;
  }
  return tree.nodes[static_cast<std::size_t>(x)].branch_time;
}

// d(x, y) = ((t - s) + (t' - s)) / 2 with s the mrca time and t, t' the ends
// of the two lifetimes. An ultrametric on any fixed-time cross-section.
inline double genealogical_distance(const GenealogyTree& tree, NodeId x,
                                    NodeId y) {
  const double s = mrca_time(tree, x, y);
  return 0.5 * ((tree.end_time(x) - s) + (tree.end_time(y) - s));
}

// B_r(x) = {y alive at the horizon : d(x, y) < r}. For same-time leaves
// d(x, y) < r iff the lineages are still merged at time t - r, so the ball
// is exactly the set of alive leaves descending from x's ancestor alive
// just after t - r.
inline std::vector<NodeId> ball(const GenealogyTree& tree, NodeId x, double r) {
  tree.require_node(x);
  if (r < 0.0) throw input_error("ball: negative radius");
  std::vector<NodeId> out;
  if (r == 0.0) return out;
  const double tau = tree.horizon - r;
  const NodeId anchor = tree.ancestor_at(x, tau);
  for (const auto& [leaf, h] : tree.leaf_heights) {
    if (tree.ancestor_at(leaf, tau) == anchor) out.push_back(leaf);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::size_t count_in(const PointMeasure& m, double a, double b) {
  return m.count_in(a, b);
}

inline PointMeasure shift(const PointMeasure& m, double c) {
  return m.shifted(c);
}

inline PointMeasure superpose(const std::vector<PointMeasure>& parts) {
  return PointMeasure::superpose(parts);
}

}  // namespace bbmlab

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/point_measure.hpp"

namespace bbmlab {

struct ClusterPair {
  double u = 0.0;          // centered height of the local maximum
  PointMeasure cluster;    // relative heights, atom at 0, support <= 0
};

struct StructuredProcess {
  std::vector<ClusterPair> pairs;
  double r_used = 0.0;
  double horizon = 0.0;
};

struct FatParams {
  double v = 0.0;
  double delta = 0.0;
  double alpha = 0.5;
};

// (u, C) lies in F_delta(-v) iff u >= -v and the cluster is (-v-u, delta)-fat:
// C([-v-u, 0]) > delta (v+u) e^{sqrt(2)(v+u)}.
inline bool is_fat_pair(double u, const PointMeasure& cluster, double v,
                        double delta) {
  if (u < -v) return false;
  const double w = v + u;
  const double threshold = delta * w * std::exp(kSqrt2 * w);
  return static_cast<double>(cluster.count_in(-w, 0.0)) > threshold;
}

namespace detail {

// Partition of alive leaves into r-balls: for same-time leaves d(x,y) < r
// iff the lineages share an ancestor alive just after horizon - r, so the
// balls are the descendant groups of the cross-section at that time.
inline std::map<NodeId, std::vector<NodeId>> ball_partition(
    const GenealogyTree& tree, double r) {
  const double tau = tree.horizon - r;
  std::map<NodeId, std::vector<NodeId>> groups;
  for (const auto& [leaf, h] : tree.leaf_heights)
    groups[tree.ancestor_at(leaf, tau)].push_back(leaf);
  return groups;
}

inline NodeId group_argmax(const GenealogyTree& tree,
                           const std::vector<NodeId>& group) {
  NodeId best = group.front();
  double best_h = tree.leaf_heights.at(best);
  for (NodeId y : group) {
    const double h = tree.leaf_heights.at(y);
    // Exact ties resolved by lowest leaf id, so the result is deterministic.
    if (h > best_h || (h == best_h && y < best)) {
      best = y;
      best_h = h;
    }
  }
  return best;
}

}  // namespace detail

// L*_t: leaves maximal within their r-ball.
inline std::vector<NodeId> local_maxima(const Population& pop, double r) {
  if (!(r > 0.0) || !(r < pop.tree.horizon))
    throw input_error("local_maxima: r must lie in (0, horizon)");
  std::vector<NodeId> out;
  for (const auto& [anchor, group] : detail::ball_partition(pop.tree, r))
    out.push_back(detail::group_argmax(pop.tree, group));
  std::sort(out.begin(), out.end());
  return out;
}

// C_{t,r}(x): relative heights h(y) - h(x) over the r-ball around x.
inline PointMeasure extract_cluster(const Population& pop, NodeId x, double r) {
  if (!pop.tree.is_alive_leaf(x)) throw input_error("extract_cluster: not a leaf");
  const double hx = pop.tree.leaf_heights.at(x);
  std::vector<double> atoms;
  for (NodeId y : ball(pop.tree, x, r))
    atoms.push_back(pop.tree.leaf_heights.at(y) - hx);
  return PointMeasure(std::move(atoms));
}

inline StructuredProcess structured_process(const Population& pop, double r) {
  if (!(r > 0.0) || !(r < pop.tree.horizon))
    throw input_error("structured_process: r must lie in (0, horizon)");
  const double mt = m(pop.tree.horizon);
  StructuredProcess sp;
  sp.r_used = r;
  sp.horizon = pop.tree.horizon;
  for (const auto& [anchor, group] : detail::ball_partition(pop.tree, r)) {
    const NodeId x = detail::group_argmax(pop.tree, group);
    const double hx = pop.tree.leaf_heights.at(x);
    std::vector<double> atoms;
    atoms.reserve(group.size());
    for (NodeId y : group) atoms.push_back(pop.tree.leaf_heights.at(y) - hx);
    sp.pairs.push_back(ClusterPair{hx - mt, PointMeasure(std::move(atoms))});
  }
  return sp;
}

inline const PointMeasure& cluster_of(const ClusterPair& pair) {
  return pair.cluster;
}

// E([-v, inf); B): total cluster-atom count above -v over pairs with
// u >= height_floor, optionally intersected with the fat filter F_delta(-v).
// Templated on the process so the limit sampler can count over borrowed
// clusters without copying them per pair.
template <class Process>
inline std::size_t restricted_count(const Process& sp, double v,
                                    double height_floor,
                                    const std::optional<FatParams>& fat = {}) {
  if (v < 0.0) throw input_error("restricted_count: v must be >= 0");
  std::size_t total = 0;
  for (const auto& pair : sp.pairs) {
    if (pair.u < height_floor) continue;
    if (pair.u < -v) continue;  // no cluster atom can reach [-v, inf)
    const PointMeasure& c = cluster_of(pair);
    if (fat && !is_fat_pair(pair.u, c, v, fat->delta)) continue;
    total += c.count_in(-v - pair.u, 0.0);
  }
  return total;
}

// E*(.; B): counts pairs, not atoms. With the fat filter this is
// E_hat(([height_floor, inf) x M) intersect F_delta(-v)).
template <class Process>
inline std::size_t star_restricted_count(
    const Process& sp, double height_floor,
    const std::optional<FatParams>& fat = {}) {
  std::size_t total = 0;
  for (const auto& pair : sp.pairs) {
    if (pair.u < height_floor) continue;
    if (fat && !is_fat_pair(pair.u, cluster_of(pair), fat->v, fat->delta))
      continue;
    ++total;
  }
  return total;
}

struct TheoremRatios {
  // Fat-within-window over window; fat-star over star; window over total.
  std::optional<double> ratio_159, ratio_158, ratio_37;
  std::size_t undefined = 0;
};

template <class Process>
inline TheoremRatios theorem_ratios(const Process& sp, double v,
                                    double alpha, double delta) {
  TheoremRatios out;
  const FatParams fat{v, delta, alpha};
  const double window = -alpha * v;

  const auto win = restricted_count(sp, v, window);
  const auto win_fat = restricted_count(sp, v, window, fat);
  if (win > 0)
    out.ratio_159 = static_cast<double>(win_fat) / static_cast<double>(win);
  else
    ++out.undefined;

  const auto star = star_restricted_count(sp, window);
  const auto star_fat = star_restricted_count(sp, window, fat);
  if (star > 0)
    out.ratio_158 = static_cast<double>(star_fat) / static_cast<double>(star);
  else
    ++out.undefined;

  const auto total = restricted_count(sp, v, -kPlusInfinity);
  if (total > 0)
    out.ratio_37 = static_cast<double>(win) / static_cast<double>(total);
  else
    ++out.undefined;
  return out;
}

}  // namespace bbmlab

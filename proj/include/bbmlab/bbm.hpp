#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bbmlab/errors.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/point_measure.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

inline constexpr double kSqrt2 = 1.4142135623730951;

inline double log_plus(double t) { return t > 1.0 ? std::log(t) : 0.0; }

// Centering function m_t = sqrt(2) t - (3 / (2 sqrt(2))) log+ t.
inline double m(double t) {
  if (t < 0.0) throw input_error("m(t): negative t");
  return kSqrt2 * t - (3.0 / (2.0 * kSqrt2)) * log_plus(t);
}

struct BbmConfig {
  double horizon_t = 1.0;
  double branch_rate = 1.0;
  // Barrier pruning: at each checkpoint s, particles with height below
  // sqrt(2) s - barrier_B are removed with their future subtree.
  bool prune = false;
  double barrier_B = 10.0;
  double checkpoint_dt = 0.5;
  std::size_t max_population = 50'000'000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(horizon_t > 0.0)) throw input_error("horizon_t must be > 0");
    if (!(branch_rate > 0.0)) throw input_error("branch_rate must be > 0");
    if (prune && !(checkpoint_dt > 0.0))
      throw input_error("checkpoint_dt must be > 0 with pruning on");
    if (prune && barrier_B < 0.0) throw input_error("barrier_B must be >= 0");
  }
};

struct Population {
  GenealogyTree tree;
  bool pruned = false;
  std::size_t pruned_count = 0;

  const std::unordered_map<NodeId, double>& heights() const {
    return tree.leaf_heights;
  }
  std::size_t size() const { return tree.leaf_heights.size(); }
};

namespace detail {

struct Walker {
  NodeId id;          // kNoNode when the recorder keeps no genealogy
  double time;        // time of last materialized height
  double height;
  double next_branch;
};

// Recorder that builds the full GenealogyTree.
struct TreeRecorder {
  GenealogyTree tree;
  NodeId add_root() {
    tree.nodes.push_back(NodeRecord{kNoNode, 0.0,
                                    std::numeric_limits<double>::quiet_NaN()});
    return 0;
  }
  std::pair<NodeId, NodeId> add_branch(NodeId parent, double when) {
    tree.nodes[static_cast<std::size_t>(parent)].branch_time = when;
    const NodeId a = static_cast<NodeId>(tree.nodes.size());
    tree.nodes.push_back(NodeRecord{parent, when,
                                    std::numeric_limits<double>::quiet_NaN()});
    const NodeId b = static_cast<NodeId>(tree.nodes.size());
    tree.nodes.push_back(NodeRecord{parent, when,
                                    std::numeric_limits<double>::quiet_NaN()});
    return {a, b};
  }
  void add_leaf(NodeId id, double height) { tree.leaf_heights[id] = height; }
  std::size_t population_guess() const { return tree.nodes.size(); }
};

// Recorder that keeps leaf heights only; used where the genealogy is not
// needed (decoration tables, spine decorations).
struct HeightRecorder {
  std::vector<double> heights;
  std::size_t born = 1;
  NodeId add_root() { return kNoNode; }
  std::pair<NodeId, NodeId> add_branch(NodeId, double) {
    born += 2;
    return {kNoNode, kNoNode};
  }
  void add_leaf(NodeId, double height) { heights.push_back(height); }
  std::size_t population_guess() const { return born; }
};

// Event-driven BBM core. Lifetimes are exponential clocks; a particle's
// height is only materialized at branch events, checkpoints and the horizon,
// each increment Gaussian with variance equal to the elapsed time. Pruning
// off runs the same checkpointed schedule with an infinite barrier, so a
// finite-barrier run with B = +inf is path-for-path identical under the
// same seed.
template <class Recorder>
inline std::size_t run_bbm(const BbmConfig& cfg, Rng& rng, Recorder& rec) {
  cfg.validate();
  const double t = cfg.horizon_t;
  const double dt = cfg.checkpoint_dt > 0.0 ? cfg.checkpoint_dt : 0.5;
  const double barrier_b =
      cfg.prune ? cfg.barrier_B : std::numeric_limits<double>::infinity();
  std::size_t pruned_count = 0;

  std::vector<Walker> alive;
  alive.push_back(Walker{rec.add_root(), 0.0, 0.0,
                         rng.exponential(cfg.branch_rate)});

  double s = 0.0;
  while (s < t) {
    const double s_end = std::min(s + dt, t);
    std::vector<Walker> survivors;
    survivors.reserve(alive.size());
    // LIFO work stack; branching pushes both children back.
    while (!alive.empty()) {
      Walker w = alive.back();
      alive.pop_back();
      if (w.next_branch < s_end) {
        const double delta = w.next_branch - w.time;
        const double h = w.height + rng.normal(0.0, std::sqrt(delta));
        auto [a, b] = rec.add_branch(w.id, w.next_branch);
        const double t0 = w.next_branch;
        alive.push_back(
            Walker{a, t0, h, t0 + rng.exponential(cfg.branch_rate)});
        alive.push_back(
            Walker{b, t0, h, t0 + rng.exponential(cfg.branch_rate)});
        if (rec.population_guess() > cfg.max_population)
          throw resource_error("max_population exceeded",
                               static_cast<double>(rec.population_guess()));
      } else {
        const double delta = s_end - w.time;
        w.height += rng.normal(0.0, std::sqrt(delta));
        w.time = s_end;
        survivors.push_back(w);
      }
    }
    if (std::isfinite(barrier_b)) {
      const double floor = kSqrt2 * s_end - barrier_b;
      std::vector<Walker> kept;
      kept.reserve(survivors.size());
      for (const Walker& w : survivors) {
        if (w.height < floor)
          ++pruned_count;
        else
          kept.push_back(w);
      }
      survivors.swap(kept);
    }
    alive.swap(survivors);
    s = s_end;
  }
  for (const Walker& w : alive) rec.add_leaf(w.id, w.height);
  return pruned_count;
}

}  // namespace detail

inline Population simulate(const BbmConfig& cfg) {
  Rng rng(cfg.seed);
  detail::TreeRecorder rec;
  Population pop;
  pop.pruned = cfg.prune;
  pop.pruned_count = detail::run_bbm(cfg, rng, rec);
  pop.tree = std::move(rec.tree);
  pop.tree.horizon = cfg.horizon_t;
  return pop;
}

// Leaf heights only (no genealogy); same law, cheaper.
inline std::vector<double> simulate_heights(const BbmConfig& cfg, Rng& rng) {
  detail::HeightRecorder rec;
  detail::run_bbm(cfg, rng, rec);
  return std::move(rec.heights);
}

inline std::vector<double> simulate_heights(const BbmConfig& cfg) {
  Rng rng(cfg.seed);
  return simulate_heights(cfg, rng);
}

// Z_t = C_diamond * sum over leaves of (sqrt(2) t - h) exp(sqrt(2)(h - sqrt(2) t)).
inline double derivative_martingale(const Population& pop, double c_diamond) {
  const double t = pop.tree.horizon;
  double z = 0.0;
  for (const auto& [id, h] : pop.tree.leaf_heights)
    z += (kSqrt2 * t - h) * std::exp(kSqrt2 * (h - kSqrt2 * t));
  return c_diamond * z;
}

inline double centered_max(const Population& pop) {
  if (pop.tree.leaf_heights.empty())
    throw input_error("centered_max: empty population");
  double best = -kPlusInfinity;
  for (const auto& [id, h] : pop.tree.leaf_heights) best = std::max(best, h);
  return best - m(pop.tree.horizon);
}

// The extremal process E_t: one atom h(x) - m_t per leaf.
inline PointMeasure centered_heights(const Population& pop) {
  const double mt = m(pop.tree.horizon);
  std::vector<double> atoms;
  atoms.reserve(pop.tree.leaf_heights.size());
  for (const auto& [id, h] : pop.tree.leaf_heights) atoms.push_back(h - mt);
  return PointMeasure(std::move(atoms));
}

}  // namespace bbmlab

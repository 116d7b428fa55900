#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/extremal.hpp"

using namespace bbmlab;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Population single_particle(double horizon, double height) {
  Population pop;
  pop.tree.horizon = horizon;
  pop.tree.nodes.resize(1);
  pop.tree.leaf_heights = {{0, height}};
  return pop;
}

// Root branches at `branch`; two leaves at the horizon.
Population two_leaves(double horizon, double branch, double h1, double h2) {
  Population pop;
  pop.tree.horizon = horizon;
  pop.tree.nodes.resize(3);
  pop.tree.nodes[0] = {kNoNode, 0.0, branch};
  pop.tree.nodes[1] = {0, branch, kNaN};
  pop.tree.nodes[2] = {0, branch, kNaN};
  pop.tree.leaf_heights = {{1, h1}, {2, h2}};
  return pop;
}

// Root branches at 0.5, its left child at 1.0; three leaves at horizon 2.
Population three_leaves(double h1, double h2, double h3) {
  Population pop;
  pop.tree.horizon = 2.0;
  pop.tree.nodes.resize(5);
  pop.tree.nodes[0] = {kNoNode, 0.0, 0.5};
  pop.tree.nodes[1] = {0, 0.5, 1.0};
  pop.tree.nodes[2] = {0, 0.5, kNaN};
  pop.tree.nodes[3] = {1, 1.0, kNaN};
  pop.tree.nodes[4] = {1, 1.0, kNaN};
  pop.tree.leaf_heights = {{3, h1}, {4, h2}, {2, h3}};
  return pop;
}

StructuredProcess one_pair(double u, PointMeasure cluster) {
  StructuredProcess sp;
  sp.pairs.push_back(ClusterPair{u, std::move(cluster)});
  return sp;
}

}  // namespace

TEST_CASE("local_maxima") {
  const auto pop = single_particle(1.0, m(1.0) + 1.0);
  CHECK(local_maxima(pop, 0.5) == std::vector<NodeId>{0});

  // d = 0.5 < r = 1: only the higher leaf.
  const auto close_pair = two_leaves(2.0, 1.5, 1.0, 0.5);
  CHECK(local_maxima(close_pair, 1.0) == std::vector<NodeId>{1});
  // d = 0.5 >= r = 0.3: balls are singletons, both maximal.
  CHECK(local_maxima(close_pair, 0.3) == std::vector<NodeId>{1, 2});

  CHECK_THROWS_AS(local_maxima(close_pair, 0.0), input_error);
  CHECK_THROWS_AS(local_maxima(close_pair, 2.0), input_error);
}

TEST_CASE("exact ties resolve by leaf id") {
  const auto tie = two_leaves(2.0, 1.5, 0.7, 0.7);
  CHECK(local_maxima(tie, 1.0) == std::vector<NodeId>{1});
}

TEST_CASE("extract_cluster") {
  const auto pop = three_leaves(5.0, 4.25, 3.0);
  // r = 1.8 reaches past both branch times: all three leaves in the ball.
  const auto cluster = extract_cluster(pop, 3, 1.8);
  CHECK(cluster.atoms() == std::vector<double>{-2.0, -0.75, 0.0});
  CHECK(cluster.count_in(-kPlusInfinity, kPlusInfinity) ==
        ball(pop.tree, 3, 1.8).size());

  const auto iso = single_particle(1.0, 2.0);
  CHECK(extract_cluster(iso, 0, 0.5).atoms() == std::vector<double>{0.0});
  CHECK_THROWS_AS(extract_cluster(pop, 99, 1.0), input_error);
}

TEST_CASE("structured_process") {
  const auto pop = single_particle(1.0, m(1.0) + 1.0);
  const auto sp = structured_process(pop, 0.5);
  REQUIRE(sp.pairs.size() == 1);
  CHECK(sp.pairs[0].u == doctest::Approx(1.0));
  CHECK(sp.pairs[0].cluster.atoms() == std::vector<double>{0.0});

  BbmConfig cfg;
  cfg.horizon_t = 4.0;
  cfg.seed = 21;
  const auto bbm_pop = simulate(cfg);
  const auto bbm_sp = structured_process(bbm_pop, 2.0);
  CHECK(bbm_sp.pairs.size() == local_maxima(bbm_pop, 2.0).size());
  for (const auto& pair : bbm_sp.pairs) {
    CHECK(pair.cluster.max_atom() == doctest::Approx(0.0));
    CHECK(pair.cluster.count_in(0.0, 0.0) >= 1);
  }
}

TEST_CASE("separation of local maxima") {
  BbmConfig cfg;
  cfg.horizon_t = 4.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto pop = simulate(cfg);
    const auto maxima = local_maxima(pop, 2.0);
    for (std::size_t i = 0; i < maxima.size(); ++i)
      for (std::size_t j = i + 1; j < maxima.size(); ++j)
        CHECK(genealogical_distance(pop.tree, maxima[i], maxima[j]) >= 2.0);
  }
}

TEST_CASE("flattened counts never exceed the centered height process") {
  BbmConfig cfg;
  cfg.horizon_t = 4.0;
  cfg.seed = 31;
  const auto pop = simulate(cfg);
  const auto sp = structured_process(pop, 2.0);
  std::vector<PointMeasure> parts;
  for (const auto& pair : sp.pairs) parts.push_back(pair.cluster.shifted(pair.u));
  const auto flat = PointMeasure::superpose(parts);
  const auto full = centered_heights(pop);
  for (double a : {-5.0, -2.0, 0.0, 1.0})
    CHECK(flat.count_in(a, kPlusInfinity) <= full.count_in(a, kPlusInfinity));
}

TEST_CASE("restricted_count") {
  // No filter: equals the flattened level-set count on [-v, inf).
  StructuredProcess sp;
  sp.pairs.push_back(ClusterPair{0.5, PointMeasure{0.0, -1.0, -3.0}});
  sp.pairs.push_back(ClusterPair{-1.0, PointMeasure{0.0, -0.2}});
  const double v = 2.0;
  std::vector<PointMeasure> parts;
  for (const auto& pair : sp.pairs) parts.push_back(pair.cluster.shifted(pair.u));
  CHECK(restricted_count(sp, v, -v) ==
        PointMeasure::superpose(parts).count_in(-v, kPlusInfinity));

  // Single pair (0, {0}), v = 1, delta = 1: 1 > e^{sqrt2} fails.
  const auto lone = one_pair(0.0, PointMeasure{0.0});
  CHECK(restricted_count(lone, 1.0, -1.0, FatParams{1.0, 1.0, 0.5}) == 0);

  // 100 atoms in [-1, 0], delta = 0.1: threshold 0.1 e^{sqrt2} ~ 0.411.
  std::vector<double> atoms(100);
  for (std::size_t i = 0; i < atoms.size(); ++i)
    atoms[i] = -static_cast<double>(i) / 100.0;
  const auto fat_pair = one_pair(0.0, PointMeasure(atoms));
  CHECK(restricted_count(fat_pair, 1.0, -1.0, FatParams{1.0, 0.1, 0.5}) == 100);

  CHECK_THROWS_AS(restricted_count(lone, -1.0, 0.0), input_error);
}

TEST_CASE("star_restricted_count") {
  CHECK(star_restricted_count(StructuredProcess{}, -1.0) == 0);
  StructuredProcess sp;
  sp.pairs.push_back(ClusterPair{0.5, PointMeasure{0.0}});
  sp.pairs.push_back(ClusterPair{-1.0, PointMeasure{0.0}});
  sp.pairs.push_back(ClusterPair{-3.0, PointMeasure{0.0}});
  CHECK(star_restricted_count(sp, -2.0) == 2);
  // A pair with u < -v is never fat-counted.
  std::vector<double> many(50, -0.1);
  StructuredProcess low;
  low.pairs.push_back(ClusterPair{-3.0, PointMeasure(many)});
  CHECK(star_restricted_count(low, -kPlusInfinity,
                              FatParams{2.0, 1e-6, 0.5}) == 0);
}

TEST_CASE("theorem_ratios") {
  // Every cluster fat: ratio_159 = 1.
  std::vector<double> dense(200, -0.05);
  dense.push_back(0.0);
  StructuredProcess sp;
  sp.pairs.push_back(ClusterPair{0.0, PointMeasure(dense)});
  const auto fat = theorem_ratios(sp, 1.0, 0.5, 0.1);
  REQUIRE(fat.ratio_159.has_value());
  CHECK(*fat.ratio_159 == doctest::Approx(1.0));
  CHECK(*fat.ratio_158 == doctest::Approx(1.0));

  // No cluster fat: both ratios 0.
  const auto lean = theorem_ratios(one_pair(0.0, PointMeasure{0.0}), 1.0,
                                   0.5, 1.0);
  CHECK(*lean.ratio_159 == doctest::Approx(0.0));
  CHECK(*lean.ratio_158 == doctest::Approx(0.0));

  // alpha = 1 opens the full window: ratio_37 = 1.
  StructuredProcess mix;
  mix.pairs.push_back(ClusterPair{0.3, PointMeasure{0.0, -0.5}});
  mix.pairs.push_back(ClusterPair{-0.9, PointMeasure{0.0}});
  const auto full = theorem_ratios(mix, 1.0, 1.0, 0.1);
  CHECK(*full.ratio_37 == doctest::Approx(1.0));

  // ratio_37 nondecreasing in alpha.
  double prev = 0.0;
  for (double alpha : {0.2, 0.5, 0.8, 1.0}) {
    const auto r = theorem_ratios(mix, 1.0, alpha, 0.1);
    REQUIRE(r.ratio_37.has_value());
    CHECK(*r.ratio_37 >= prev);
    prev = *r.ratio_37;
  }

  // Zero denominators are flagged, not imputed.
  const auto empty = theorem_ratios(StructuredProcess{}, 1.0, 0.5, 0.1);
  CHECK(empty.undefined == 3);
  CHECK_FALSE(empty.ratio_37.has_value());
}

TEST_CASE("fat filter monotonicity in delta") {
  BbmConfig cfg;
  cfg.horizon_t = 4.0;
  cfg.seed = 41;
  const auto sp = structured_process(simulate(cfg), 2.0);
  const double v = 1.0;
  std::size_t prev = restricted_count(sp, v, -v, FatParams{v, 1e-9, 0.5});
  for (double delta : {0.1, 1.0, 10.0}) {
    const std::size_t cur = restricted_count(sp, v, -v, FatParams{v, delta, 0.5});
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK(restricted_count(sp, v, -v, FatParams{v, 1e-9, 0.5}) <=
        restricted_count(sp, v, -v));
  CHECK(restricted_count(sp, v, -v) <=
        centered_heights(simulate(cfg)).count_in(-v, kPlusInfinity));
}

#include <doctest.h>

#include <cmath>

#include "bbmlab/bbm.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/point_measure.hpp"

using namespace bbmlab;

namespace {

// Root branches at 1; its left child branches at 2. Horizon 3.
// Leaves: 2 (right child of root), 3 and 4 (children of node 1).
GenealogyTree three_leaf_tree() {
  GenealogyTree tree;
  tree.horizon = 3.0;
  tree.nodes.resize(5);
  tree.nodes[0] = {kNoNode, 0.0, 1.0};
  tree.nodes[1] = {0, 1.0, 2.0};
  tree.nodes[2] = {0, 1.0, std::numeric_limits<double>::quiet_NaN()};
  tree.nodes[3] = {1, 2.0, std::numeric_limits<double>::quiet_NaN()};
  tree.nodes[4] = {1, 2.0, std::numeric_limits<double>::quiet_NaN()};
  tree.leaf_heights = {{2, 0.5}, {3, 1.0}, {4, -0.3}};
  return tree;
}

GenealogyTree two_leaf_tree(double horizon, double branch) {
  GenealogyTree tree;
  tree.horizon = horizon;
  tree.nodes.resize(3);
  tree.nodes[0] = {kNoNode, 0.0, branch};
  tree.nodes[1] = {0, branch, std::numeric_limits<double>::quiet_NaN()};
  tree.nodes[2] = {0, branch, std::numeric_limits<double>::quiet_NaN()};
  tree.leaf_heights = {{1, 1.0}, {2, 0.0}};
  return tree;
}

}  // namespace

TEST_CASE("mrca_time") {
  const auto tree = three_leaf_tree();
  CHECK(mrca_time(tree, 3, 3) == 3.0);  // a particle is its own ancestor
  CHECK(mrca_time(tree, 3, 4) == 2.0);
  CHECK(mrca_time(tree, 3, 2) == 1.0);
  CHECK(mrca_time(tree, 4, 2) == 1.0);
  CHECK(mrca_time(tree, 2, 3) == mrca_time(tree, 3, 2));
  CHECK_THROWS_AS(mrca_time(tree, 3, 99), input_error);
}

TEST_CASE("genealogical_distance") {
  const auto tree = three_leaf_tree();
  CHECK(genealogical_distance(tree, 3, 3) == 0.0);

  const auto pair = two_leaf_tree(5.0, 2.0);
  CHECK(genealogical_distance(pair, 1, 2) == 3.0);

  // Cross-section times 5 and 7: an internal node that branched at 5 versus
  // a leaf at horizon 7, mrca at 2.
  GenealogyTree tree2;
  tree2.horizon = 7.0;
  tree2.nodes.resize(5);
  tree2.nodes[0] = {kNoNode, 0.0, 2.0};
  tree2.nodes[1] = {0, 2.0, 5.0};
  tree2.nodes[2] = {0, 2.0, std::numeric_limits<double>::quiet_NaN()};
  tree2.nodes[3] = {1, 5.0, std::numeric_limits<double>::quiet_NaN()};
  tree2.nodes[4] = {1, 5.0, std::numeric_limits<double>::quiet_NaN()};
  tree2.leaf_heights = {{2, 0.0}, {3, 0.0}, {4, 0.0}};
  CHECK(genealogical_distance(tree2, 1, 2) == doctest::Approx(4.0));
}

TEST_CASE("ball") {
  const auto tree = three_leaf_tree();
  CHECK(ball(tree, 3, 0.0).empty());
  CHECK(ball(tree, 3, 10.0) == std::vector<NodeId>{2, 3, 4});

  const auto pair = two_leaf_tree(5.0, 2.0);
  // d = t - s = 3, not < r = 3.
  CHECK(ball(pair, 1, 3.0) == std::vector<NodeId>{1});
  CHECK(ball(pair, 1, 3.0 + 1e-9) == std::vector<NodeId>{1, 2});

  CHECK(ball(tree, 3, 0.5) == std::vector<NodeId>{3});
  CHECK(ball(tree, 3, 1.5) == std::vector<NodeId>{3, 4});
  CHECK_THROWS_AS(ball(tree, 99, 1.0), input_error);
}

TEST_CASE("ultrametric and ball symmetry on a simulated tree") {
  BbmConfig cfg;
  cfg.horizon_t = 3.0;
  cfg.seed = 11;
  const auto pop = simulate(cfg);
  const auto leaves = pop.tree.alive_leaves();
  REQUIRE(leaves.size() >= 3);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (std::size_t j = 0; j < leaves.size(); ++j) {
      const double dij = genealogical_distance(pop.tree, leaves[i], leaves[j]);
      CHECK(dij == genealogical_distance(pop.tree, leaves[j], leaves[i]));
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        const double dik =
            genealogical_distance(pop.tree, leaves[i], leaves[k]);
        const double dkj =
            genealogical_distance(pop.tree, leaves[k], leaves[j]);
        CHECK(dij <= std::max(dik, dkj) + 1e-12);
      }
    }
  }
  for (NodeId x : leaves) {
    for (NodeId y : leaves) {
      const auto bx = ball(pop.tree, x, 1.5);
      const bool y_in_bx =
          std::find(bx.begin(), bx.end(), y) != bx.end();
      const auto by = ball(pop.tree, y, 1.5);
      const bool x_in_by =
          std::find(by.begin(), by.end(), x) != by.end();
      CHECK(y_in_bx == x_in_by);
    }
  }
}

TEST_CASE("count_in") {
  const PointMeasure m{-1.5, -0.2, 0.0};
  CHECK(m.count_in(-1.0, 0.0) == 2);
  CHECK(PointMeasure{}.count_in(-1.0, 1.0) == 0);
  CHECK(m.count_in(-kPlusInfinity, kPlusInfinity) == 3);
  CHECK_THROWS_AS(m.count_in(1.0, 0.0), input_error);
  // monotone in interval inclusion, finitely additive
  CHECK(m.count_in(-1.0, 0.0) <= m.count_in(-2.0, 0.0));
  CHECK(m.count_in(-2.0, -1.0) + m.count_in(-1.0 + 1e-12, 0.0) ==
        m.count_in(-2.0, 0.0));
}

TEST_CASE("shift and superpose") {
  CHECK(shift(PointMeasure{0.0}, -3.0).atoms() == std::vector<double>{-3.0});
  const auto sup = superpose({PointMeasure{0.0}, PointMeasure{0.0}});
  CHECK(sup.count_in(0.0, 0.0) == 2);
  const auto shifted = shift(PointMeasure{-1.0, 0.0}, 1.0);
  CHECK(shifted.count_in(0.0, 1.0) == 2);
}

/*
Copyright 2026 The Meshflow Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#include <gtest/gtest.h>

#include <random>

#include "generators.h"
#include "meshflow/auto_parallel.h"
#include "meshflow/error.h"
#include "meshflow/graph_text.h"

namespace meshflow {
namespace {

// Reference optimum by explicit enumeration, written without the library's
// search code.
double Enumerate(const CostGraph& g) {
  const int n = static_cast<int>(g.nodes().size());
  std::vector<int> a(n, 0);
  double best = 1e300;
  while (true) {
    double c = 0;
    for (int i = 0; i < n; ++i) { c += g.node(i).comp[a[i]]; }
    for (const CostEdge& e : g.edges()) { c += e.cost[a[e.a] * g.node(e.b).comp.size() + a[e.b]]; }
    best = std::min(best, c);
    int i = 0;
    while (i < n && ++a[i] == static_cast<int>(g.node(i).comp.size())) { a[i++] = 0; }
    if (i == n) { break; }
  }
  return best;
}

double CostOf(const CostGraph& original, std::vector<int> assignment) {
  assignment.resize(original.nodes().size());
  return original.TotalCost(assignment);
}

// The two-node example: a costs {1,3}, b costs {2,1}, 5 off the diagonal.
CostGraph TwoNodes() {
  CostGraph g;
  g.AddNode("a", {1, 3});
  g.AddNode("b", {2, 1});
  g.AddEdge(0, 1, {0, 5, 5, 0});
  return g;
}

TEST(CostGraphTest, NodeElimination) {
  CostGraph g;
  g.AddNode("x", {0, 0});
  g.AddNode("m", {1, 0});
  g.AddNode("y", {0, 0});
  g.AddEdge(0, 1, {0, 0, 0, 0});
  g.AddEdge(1, 2, {0, 0, 10, 10});
  g.EliminateNode(1);
  EXPECT_EQ(g.num_alive_nodes(), 2);
  ASSERT_EQ(g.num_alive_edges(), 1);
  const CostEdge& e = g.edges().back();
  EXPECT_EQ(e.cost, (std::vector<double>{1, 1, 1, 1}));
  const auto& rec = std::get<NodeElimination>(g.log().back());
  EXPECT_EQ(rec.argmin, (std::vector<int>{0, 0, 0, 0}));

  CostGraph single;
  single.AddNode("x", {0, 0});
  single.AddNode("m", {4});
  single.AddNode("y", {0, 0});
  single.AddEdge(0, 1, {1, 2});
  single.AddEdge(1, 2, {10, 20});
  single.EliminateNode(1);
  EXPECT_EQ(single.edges().back().cost, (std::vector<double>{15, 25, 16, 26}));

  CostGraph leaf = TwoNodes();
  EXPECT_THROW(leaf.EliminateNode(0), Error);
}

TEST(CostGraphTest, TriangleLeavesParallelEdges) {
  CostGraph g;
  for (const char* n : {"a", "b", "c"}) { g.AddNode(n, {0, 1}); }
  g.AddEdge(0, 1, {0, 1, 1, 0});
  g.AddEdge(1, 2, {0, 1, 1, 0});
  g.AddEdge(0, 2, {0, 1, 1, 0});
  g.EliminateNode(1);
  EXPECT_EQ(g.EdgesBetween(0, 2).size(), 2u);
  g.EliminateEdges(0, 2);
  EXPECT_EQ(g.EdgesBetween(0, 2).size(), 1u);
  EXPECT_EQ(g.edges().back().cost, (std::vector<double>{0, 2, 2, 1}));
}

TEST(CostGraphTest, EdgeElimination) {
  CostGraph g;
  g.AddNode("a", {0, 0});
  g.AddNode("b", {0, 0});
  g.AddEdge(0, 1, {1, 2, 3, 4});
  g.AddEdge(0, 1, {10, 20, 30, 40});
  g.AddEdge(1, 0, {100, 200, 300, 400});  // stored as (b, a)
  g.EliminateEdges(0, 1);
  EXPECT_EQ(g.num_alive_edges(), 1);
  EXPECT_EQ(g.edges().back().cost, (std::vector<double>{111, 322, 233, 444}));

  CostGraph z;
  z.AddNode("a", {0, 0});
  z.AddNode("b", {0, 0});
  z.AddEdge(0, 1, {0, 0, 0, 0});
  z.AddEdge(0, 1, {1, 2, 3, 4});
  z.EliminateEdges(0, 1);
  EXPECT_EQ(z.edges().back().cost, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(z.EliminateEdges(0, 1), Error);
}

TEST(CostGraphTest, LeafElimination) {
  CostGraph g = TwoNodes();
  g.EliminateLeaf(1);
  EXPECT_EQ(g.node(0).comp, (std::vector<double>{3, 4}));
  EXPECT_EQ(g.num_alive_nodes(), 1);
  EXPECT_EQ(std::get<LeafElimination>(g.log().back()).argmin, (std::vector<int>{0, 1}));

  CostGraph c;
  c.AddNode("a", {1, 2});
  c.AddNode("k", {5});
  c.AddEdge(0, 1, {0, 0});
  c.EliminateLeaf(1);
  EXPECT_EQ(c.node(0).comp, (std::vector<double>{6, 7}));
  EXPECT_THROW(c.EliminateLeaf(0), Error);
}

CostGraph Complete(int n, int candidates, std::mt19937_64& rng) {
  CostGraph g;
  std::uniform_int_distribution<int> u(0, 9);
  for (int i = 0; i < n; ++i) {
    std::vector<double> comp(candidates);
    for (double& c : comp) { c = u(rng); }
    g.AddNode("n" + std::to_string(i), comp);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      std::vector<double> cost(candidates * candidates);
      for (double& c : cost) { c = u(rng); }
      g.AddEdge(i, j, cost);
    }
  }
  return g;
}

TEST(CostGraphTest, MergeNodes) {
  std::mt19937_64 rng(1);
  CostGraph k4 = Complete(4, 3, rng);
  EXPECT_FALSE(k4.MergeNodes(8));
  ASSERT_TRUE(k4.MergeNodes(9));
  const auto& rec = std::get<NodeMerge>(k4.log().back());
  EXPECT_EQ(rec.first, 0);
  EXPECT_EQ(rec.second, 1);
  EXPECT_EQ(k4.node(rec.merged).num_candidates(), 9);
  // Merged cost includes the edge between the pair.
  std::mt19937_64 again(1);
  const CostGraph fresh = Complete(4, 3, again);
  for (size_t c = 0; c < rec.pairs.size(); ++c) {
    const auto [s0, s1] = rec.pairs[c];
    EXPECT_EQ(k4.node(rec.merged).comp[c], fresh.node(0).comp[s0] + fresh.node(1).comp[s1] +
                                                fresh.edge(0).cost[s0 * 3 + s1]);
  }

  // Cartesian size 3 x 4 under alpha 12.
  CostGraph mixed;
  const std::vector<int> sizes = {3, 4, 4, 4};
  for (int i = 0; i < 4; ++i) { mixed.AddNode("n", std::vector<double>(sizes[i], 1)); }
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) { mixed.AddEdge(i, j, std::vector<double>(sizes[i] * sizes[j], 0)); }
  }
  ASSERT_TRUE(mixed.MergeNodes(12));
  EXPECT_EQ(mixed.nodes().back().num_candidates(), 12);
}

TEST(CostGraphTest, MergeWithoutSharedEdge) {
  // K_{3,3}-like graph: all degrees 3, nodes 0 and 1 not adjacent.
  CostGraph g;
  for (int i = 0; i < 6; ++i) { g.AddNode("n" + std::to_string(i), {double(i), double(10 + i)}); }
  for (int a : {0, 1, 2}) {
    for (int b : {3, 4, 5}) { g.AddEdge(a, b, {0, 1, 1, 0}); }
  }
  ASSERT_TRUE(g.MergeNodes(4));
  const auto& rec = std::get<NodeMerge>(g.log().back());
  EXPECT_EQ(rec.first, 0);
  EXPECT_EQ(rec.second, 1);
  EXPECT_EQ(g.node(rec.merged).comp, (std::vector<double>{1, 11, 11, 21}));
}

TEST(SimplifyTest, TreesAndChainsCollapse) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    CostGraph tree;
    const int n = 2 + i % 7;
    for (int k = 0; k < n; ++k) { tree.AddNode("n", {double(k % 3), 1}); }
    for (int k = 1; k < n; ++k) { tree.AddEdge(std::uniform_int_distribution<int>(0, k - 1)(rng), k, {0, 2, 3, 1}); }
    const double best = Enumerate(tree);
    CostGraph reduced = tree;
    Simplify(reduced);
    EXPECT_EQ(reduced.num_alive_nodes(), 1);
    const GreedyResult g = GreedySearch(reduced);
    EXPECT_EQ(CostOf(tree, Backtrack(reduced, g.assignment)), best);
  }
  CostGraph chain;
  for (int k = 0; k < 5; ++k) { chain.AddNode("c", {1, 2}); }
  for (int k = 1; k < 5; ++k) { chain.AddEdge(k - 1, k, {0, 1, 1, 0}); }
  Simplify(chain);
  EXPECT_EQ(chain.num_alive_nodes(), 1);
}

TEST(SimplifyTest, CompleteGraphNeedsMerging) {
  std::mt19937_64 rng(3);
  CostGraph k4 = Complete(4, 3, rng);
  const CostGraph original = k4;
  Simplify(k4, 9);
  bool merged = false;
  for (const EliminationRecord& r : k4.log()) { merged = merged || std::holds_alternative<NodeMerge>(r); }
  EXPECT_TRUE(merged);
  EXPECT_EQ(k4.num_alive_nodes(), 1);
  EXPECT_EQ(CostOf(original, Backtrack(k4, GreedySearch(k4).assignment)), Enumerate(original));
}

TEST(SimplifyTest, EachStepShrinksAsExpected) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    CostGraph g = testutil::RandomCostGraph(rng, 8, 4);
    CostGraph work = g;
    Simplify(work, 64);
    // Replay the log on a copy and check each record's size effect.
    CostGraph replay = g;
    for (const EliminationRecord& rec : work.log()) {
      const int nodes = replay.num_alive_nodes(), edges = replay.num_alive_edges();
      if (const auto* r = std::get_if<NodeElimination>(&rec)) {
        replay.EliminateNode(r->node);
        EXPECT_EQ(replay.num_alive_nodes(), nodes - 1);
        EXPECT_EQ(replay.num_alive_edges(), edges - 1);
      } else if (const auto* r = std::get_if<EdgeElimination>(&rec)) {
        const CostEdge& e = replay.edge(r->removed_edges[0]);
        replay.EliminateEdges(e.a, e.b);
        EXPECT_EQ(replay.num_alive_edges(), edges - static_cast<int>(r->removed_edges.size()) + 1);
      } else if (const auto* r = std::get_if<LeafElimination>(&rec)) {
        replay.EliminateLeaf(r->leaf);
        EXPECT_EQ(replay.num_alive_nodes(), nodes - 1);
        EXPECT_EQ(replay.num_alive_edges(), edges - 1);
      } else {
        ASSERT_TRUE(replay.MergeNodes(64));
        EXPECT_EQ(replay.num_alive_nodes(), nodes - 1);
      }
    }
    EXPECT_EQ(replay.num_alive_nodes(), work.num_alive_nodes());
  }
}

TEST(GreedyTest, Examples) {
  CostGraph single;
  single.AddNode("s", {7, 3, 9});
  EXPECT_EQ(GreedySearch(single).assignment, std::vector<int>{1});

  const CostGraph two = TwoNodes();
  const GreedyResult from_zero = GreedySearch(two);
  EXPECT_EQ(from_zero.assignment, (std::vector<int>{0, 0}));
  EXPECT_EQ(from_zero.changes, 0);
  EXPECT_EQ(from_zero.final_cost, 3);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const GreedyResult r = GreedySearch(two, seed);
    EXPECT_EQ(r.final_cost, 3);
    EXPECT_EQ(r.assignment, (std::vector<int>{0, 0}));
  }
}

TEST(GreedyTest, MonotoneAndBracketed) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const CostGraph g = testutil::RandomCostGraph(rng, 8, 4, i % 2 == 0);
    const BruteForceResult best = BruteForce(g);
    EXPECT_EQ(best.cost, Enumerate(g));
    const GreedyResult r = GreedySearch(g, i % 3 == 0 ? std::nullopt : std::optional<uint64_t>(i));
    double prev = r.initial_cost;
    for (double c : r.cost_trace) {
      EXPECT_LE(c, prev);
      prev = c;
    }
    EXPECT_LE(best.cost, r.final_cost);
    EXPECT_LE(r.final_cost, r.initial_cost);
    EXPECT_EQ(r.final_cost, g.TotalCost(r.assignment));
  }
}

TEST(BacktrackTest, ExactWhenFullyReduced) {
  std::mt19937_64 rng(6);
  int reduced = 0;
  for (int i = 0; i < 300; ++i) {
    const CostGraph g = testutil::RandomCostGraph(rng, 8, 4);
    CostGraph work = g;
    Simplify(work);
    if (work.num_alive_nodes() != 1) { continue; }
    ++reduced;
    const std::vector<int> full = Backtrack(work, GreedySearch(work).assignment);
    for (size_t n = 0; n < g.nodes().size(); ++n) {
      ASSERT_GE(full[n], 0);
      ASSERT_LT(full[n], g.node(n).num_candidates());
    }
    EXPECT_EQ(CostOf(g, full), BruteForce(g).cost);
  }
  EXPECT_GT(reduced, 100);
}

TEST(BacktrackTest, SingleNodeAndMergedPair) {
  CostGraph single;
  single.AddNode("s", {4, 2});
  EXPECT_EQ(Backtrack(single, {1}), std::vector<int>{1});

  std::mt19937_64 rng(7);
  CostGraph k4 = Complete(4, 2, rng);
  ASSERT_TRUE(k4.MergeNodes(4));
  const auto rec = std::get<NodeMerge>(k4.log().back());
  std::vector<int> assignment(k4.nodes().size(), -1);
  assignment[rec.merged] = 2;
  for (int n = 0; n < 4; ++n) {
    if (k4.node(n).alive) { assignment[n] = 0; }
  }
  const std::vector<int> full = Backtrack(k4, assignment);
  EXPECT_EQ(full[rec.first], rec.pairs[2].first);
  EXPECT_EQ(full[rec.second], rec.pairs[2].second);
}

TEST(BruteForceTest, Examples) {
  const BruteForceResult two = BruteForce(TwoNodes());
  EXPECT_EQ(two.cost, 3);
  EXPECT_EQ(two.assignment, (std::vector<int>{0, 0}));

  CostGraph zeros;
  zeros.AddNode("a", {0, 0});
  zeros.AddNode("b", {0, 0, 0});
  zeros.AddEdge(0, 1, std::vector<double>(6, 0));
  EXPECT_EQ(BruteForce(zeros).assignment, (std::vector<int>{0, 0}));
  EXPECT_EQ(BruteForce(zeros).cost, 0);

  CostGraph single;
  single.AddNode("s", {5, 1, 8});
  EXPECT_EQ(BruteForce(single).assignment, std::vector<int>{1});

  CostGraph huge;
  for (int i = 0; i < 11; ++i) { huge.AddNode("h", std::vector<double>(4, 0)); }
  EXPECT_THROW(BruteForce(huge), Error);
}

TEST(StrategyTest, CostModel) {
  const LogicalGraph g = ParseGraphText(
      "op a source placement={0:[0,1]} shape=[4,5]\n"
      "op w source placement={0:[0,1]} shape=[5,8]\n"
      "op m matmul placement={0:[0,1]}\n"
      "edge a -> m:0\n"
      "edge w -> m:1\n");
  const StrategyProblem problem = BuildCostGraph(g);
  const int m = 2;
  bool found = false;
  for (size_t c = 0; c < problem.candidates[m].size(); ++c) {
    if (problem.candidates[m][c].ToString() == "S(0),B -> S(0)") {
      EXPECT_EQ(problem.graph.node(m).comp[c], 160);
      found = true;
    }
  }
  EXPECT_TRUE(found);
  CostModel fast;
  fast.device_speed = 4;
  EXPECT_EQ(BuildCostGraph(g, fast).graph.node(m).comp[0], problem.graph.node(m).comp[0] / 4);

  // Producer S(0) feeding a consumer input B on the same two devices: an
  // all-gather of the 4x4 tensor (128 bytes).
  const LogicalGraph chain = ParseGraphText(
      "op x source placement={0:[0,1]} shape=[4,4]\n"
      "op r relu placement={0:[0,1]}\n"
      "edge x -> r:0\n");
  const StrategyProblem cp = BuildCostGraph(chain);
  const CostEdge& e = cp.graph.edge(0);
  const int nc = cp.graph.node(1).num_candidates();
  for (int sp = 0; sp < cp.graph.node(0).num_candidates(); ++sp) {
    for (int sc = 0; sc < nc; ++sc) {
      const NdSbp& src = cp.candidates[0][sp].output;
      const NdSbp& dst = cp.candidates[1][sc].inputs[0];
      if (src == dst) { EXPECT_EQ(e.cost[sp * nc + sc], 0); }
      if (src.ToString() == "S(0)" && dst.ToString() == "B") { EXPECT_EQ(e.cost[sp * nc + sc], 128); }
    }
  }
}

TEST(StrategyTest, SearchMatchesExhaustiveOnSmallGraphs) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 30; ++i) {
    LogicalGraph g = testutil::RandomGraph(rng, 6);
    for (LogicalOp& op : g.mutable_ops()) {
      op.sbp.reset();
      op.in_sbp.clear();
    }
    LogicalGraph bare;
    for (const LogicalOp& op : g.ops()) { bare.AddOp(op); }
    for (const Edge& e : g.edges()) { bare.AddEdge(e.producer, e.consumer, e.slot); }
    const StrategyProblem problem = BuildCostGraph(bare);
    const Strategy s = SearchStrategy(problem);
    EXPECT_GE(s.cost, BruteForce(problem.graph).cost);
    if (s.reduced_nodes == 1) { EXPECT_EQ(s.cost, BruteForce(problem.graph).cost); }
    ApplyStrategy(bare, s);
    for (const LogicalOp& op : bare.ops()) { EXPECT_TRUE(op.sbp.has_value()); }
  }
}

}  // namespace
}  // namespace meshflow

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
#ifndef MESHFLOW_AUTO_PARALLEL_H_
#define MESHFLOW_AUTO_PARALLEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "meshflow/graph.h"
#include "meshflow/sbp.h"

namespace meshflow {

struct CostNode {
  std::string name;
  std::vector<double> comp;  // one entry per candidate
  bool alive = true;

  int num_candidates() const { return static_cast<int>(comp.size()); }
};

// Undirected edge; `cost` is row-major over (candidate of a, candidate of b).
struct CostEdge {
  int a = 0;
  int b = 0;
  std::vector<double> cost;
  bool alive = true;
};

struct NodeElimination {
  int node;
  int left, right;                  // surviving neighbors
  std::vector<int> removed_edges;
  int new_edge;
  std::vector<int> argmin;          // [s_left * |right| + s_right] -> s_node
};

struct EdgeElimination {
  std::vector<int> removed_edges;
  int new_edge;
};

struct LeafElimination {
  int leaf;
  int into;
  int removed_edge;
  std::vector<int> argmin;  // [s_into] -> s_leaf
};

struct NodeMerge {
  int first, second;
  int merged;
  std::vector<std::pair<int, int>> pairs;  // merged candidate -> (s_first, s_second)
};

using EliminationRecord = std::variant<NodeElimination, EdgeElimination, LeafElimination, NodeMerge>;

// Mutating operations never delete entries: nodes and edges are marked dead
// and replacements are appended, so indices stay stable for backtracking.
class CostGraph {
 public:
  int AddNode(std::string name, std::vector<double> comp);
  int AddEdge(int a, int b, std::vector<double> cost);

  const std::vector<CostNode>& nodes() const { return nodes_; }
  const std::vector<CostEdge>& edges() const { return edges_; }
  const CostNode& node(int i) const { return nodes_.at(i); }
  const CostEdge& edge(int e) const { return edges_.at(e); }
  const std::vector<EliminationRecord>& log() const { return log_; }

  int num_alive_nodes() const;
  int num_alive_edges() const;
  // Alive edges touching `n`; parallel edges are listed separately.
  std::vector<int> IncidentEdges(int n) const;
  int Degree(int n) const { return static_cast<int>(IncidentEdges(n).size()); }
  // Distinct alive neighbors, ascending.
  std::vector<int> Neighbors(int n) const;
  // Alive edges between `u` and `v`.
  std::vector<int> EdgesBetween(int u, int v) const;

  // Cost of edge `e` when endpoint `u` takes `su` and the other endpoint `sv`.
  double EdgeCost(int e, int u, int su, int sv) const;

  // Σ alive node costs + Σ alive edge costs. `assignment` is indexed by node.
  double TotalCost(const std::vector<int>& assignment) const;

  void EliminateNode(int n);
  void EliminateEdges(int u, int v);
  void EliminateLeaf(int n);
  // Merges the eligible pair with the largest common neighborhood. Returns
  // false when no pair qualifies.
  bool MergeNodes(int alpha);

 private:
  int Other(const CostEdge& e, int n) const { return e.a == n ? e.b : e.a; }

  std::vector<CostNode> nodes_;
  std::vector<CostEdge> edges_;
  std::vector<EliminationRecord> log_;
};

inline constexpr int kDefaultMergeThreshold = 64;

// Applies edge, leaf and node eliminations (in that priority, lowest index
// first) and falls back to merging until nothing applies.
void Simplify(CostGraph& graph, int alpha = kDefaultMergeThreshold);

struct GreedyResult {
  std::vector<int> assignment;  // indexed by node; dead nodes hold -1
  double initial_cost = 0;
  double final_cost = 0;
  std::vector<double> cost_trace;  // total cost after every worklist step
  int changes = 0;
};

// Pairwise coordinate descent over the alive nodes. Starts from candidate 0
// unless `seed` is given, in which case the start is drawn uniformly.
GreedyResult GreedySearch(const CostGraph& graph, std::optional<uint64_t> seed = std::nullopt);

// Replays the log in reverse to assign every node that was eliminated or
// merged away.
std::vector<int> Backtrack(const CostGraph& graph, std::vector<int> assignment);

struct BruteForceResult {
  double cost = 0;
  std::vector<int> assignment;
};

inline constexpr int64_t kBruteForceLimit = 1000000;

// Exhaustive minimum over alive nodes; first lexicographic assignment wins ties.
BruteForceResult BruteForce(const CostGraph& graph);

struct CostModel {
  double device_speed = 1.0;  // FLOPs per cost unit
  double bandwidth = 1.0;     // bytes per cost unit
};

// One cost-graph node per op, in op order.
struct StrategyProblem {
  CostGraph graph;
  std::vector<std::string> op_ids;
  std::vector<std::vector<OpSbpSignature>> candidates;
};

// Candidates come from the inference rules, filtered by any signature the
// graph already declares. Edge matrices hold the transfer cost of each
// producer/consumer signature pair, including explicit transforms.
StrategyProblem BuildCostGraph(const LogicalGraph& graph, const CostModel& model = {});

// Estimated time of running `op` under `sig`: FLOPs of the busiest device's
// local computation divided by the device speed.
double ComputeCost(const LogicalOp& op, const std::vector<Shape>& input_shapes, const OpSbpSignature& sig,
                   const CostModel& model);

struct StrategyOptions {
  int alpha = kDefaultMergeThreshold;
  std::optional<uint64_t> seed;
  CostModel model;
};

struct Strategy {
  std::map<std::string, OpSbpSignature> signatures;
  std::vector<int> assignment;  // per op, index into the problem's candidates
  double cost = 0;              // evaluated on the unsimplified cost graph
  int reduced_nodes = 0;        // nodes left after simplification
};

Strategy SearchStrategy(const StrategyProblem& problem, const StrategyOptions& options = {});

// Writes the chosen signatures into the graph as declared annotations.
void ApplyStrategy(LogicalGraph& graph, const Strategy& strategy);

}  // namespace meshflow

#endif  // MESHFLOW_AUTO_PARALLEL_H_

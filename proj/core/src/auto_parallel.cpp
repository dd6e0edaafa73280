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
#include "meshflow/auto_parallel.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <set>

#include "meshflow/boxing.h"
#include "meshflow/error.h"

namespace meshflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int ArgMin(const std::vector<double>& v) {
  return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

int CostGraph::AddNode(std::string name, std::vector<double> comp) {
  MF_CHECK(!comp.empty(), ErrorCode::kInvalidArgument, "cost node '", name, "' has no candidates");
  for (double c : comp) {
    MF_CHECK(c >= 0, ErrorCode::kInvalidArgument, "negative computation cost on '", name, "'");
  }
  nodes_.push_back({std::move(name), std::move(comp), true});
  return static_cast<int>(nodes_.size()) - 1;
}

int CostGraph::AddEdge(int a, int b, std::vector<double> cost) {
  MF_CHECK(a >= 0 && a < static_cast<int>(nodes_.size()) && b >= 0 && b < static_cast<int>(nodes_.size()),
           ErrorCode::kInvalidArgument, "edge endpoint out of range");
  MF_CHECK(a != b, ErrorCode::kInvalidArgument, "self-loop in cost graph");
  MF_CHECK(cost.size() == static_cast<size_t>(nodes_[a].num_candidates()) * nodes_[b].num_candidates(),
           ErrorCode::kInvalidArgument, "edge matrix has ", cost.size(), " entries, expected ",
           nodes_[a].num_candidates(), "x", nodes_[b].num_candidates());
  for (double c : cost) { MF_CHECK(c >= 0, ErrorCode::kInvalidArgument, "negative edge cost"); }
  edges_.push_back({a, b, std::move(cost), true});
  return static_cast<int>(edges_.size()) - 1;
}

int CostGraph::num_alive_nodes() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const CostNode& n) { return n.alive; }));
}

int CostGraph::num_alive_edges() const {
  return static_cast<int>(std::count_if(edges_.begin(), edges_.end(), [](const CostEdge& e) { return e.alive; }));
}

std::vector<int> CostGraph::IncidentEdges(int n) const {
  std::vector<int> out;
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    if (edges_[e].alive && (edges_[e].a == n || edges_[e].b == n)) { out.push_back(e); }
  }
  return out;
}

std::vector<int> CostGraph::Neighbors(int n) const {
  std::set<int> out;
  for (int e : IncidentEdges(n)) { out.insert(Other(edges_[e], n)); }
  return {out.begin(), out.end()};
}

std::vector<int> CostGraph::EdgesBetween(int u, int v) const {
  std::vector<int> out;
  for (int e : IncidentEdges(u)) {
    if (Other(edges_[e], u) == v) { out.push_back(e); }
  }
  return out;
}

double CostGraph::EdgeCost(int e, int u, int su, int sv) const {
  const CostEdge& edge = edges_.at(e);
  if (edge.a == u) { return edge.cost[su * nodes_[edge.b].num_candidates() + sv]; }
  return edge.cost[sv * nodes_[edge.b].num_candidates() + su];
}

double CostGraph::TotalCost(const std::vector<int>& assignment) const {
  MF_CHECK(assignment.size() >= nodes_.size(), ErrorCode::kInvalidArgument, "assignment covers ",
           assignment.size(), " of ", nodes_.size(), " nodes");
  double total = 0;
  for (size_t n = 0; n < nodes_.size(); ++n) {
    if (!nodes_[n].alive) { continue; }
    MF_CHECK(assignment[n] >= 0 && assignment[n] < nodes_[n].num_candidates(), ErrorCode::kInvalidArgument,
             "node ", nodes_[n].name, " has no valid choice");
    total += nodes_[n].comp[assignment[n]];
  }
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    if (edges_[e].alive) { total += EdgeCost(e, edges_[e].a, assignment[edges_[e].a], assignment[edges_[e].b]); }
  }
  return total;
}

void CostGraph::EliminateNode(int n) {
  MF_CHECK(nodes_.at(n).alive, ErrorCode::kInvalidArgument, "node ", n, " is already eliminated");
  const std::vector<int> inc = IncidentEdges(n);
  MF_CHECK(inc.size() == 2, ErrorCode::kInvalidArgument, "node elimination needs degree 2, node ",
           nodes_[n].name, " has degree ", inc.size());
  const int left = Other(edges_[inc[0]], n);
  const int right = Other(edges_[inc[1]], n);
  MF_CHECK(left != right, ErrorCode::kInvalidArgument, "node ", nodes_[n].name,
           " has parallel edges; eliminate them first");
  const int cl = nodes_[left].num_candidates();
  const int cr = nodes_[right].num_candidates();
  std::vector<double> cost(static_cast<size_t>(cl) * cr);
  std::vector<int> argmin(cost.size());
  for (int sl = 0; sl < cl; ++sl) {
    for (int sr = 0; sr < cr; ++sr) {
      double best = kInf;
      int best_s = 0;
      for (int s = 0; s < nodes_[n].num_candidates(); ++s) {
        const double c = nodes_[n].comp[s] + EdgeCost(inc[0], n, s, sl) + EdgeCost(inc[1], n, s, sr);
        if (c < best) {
          best = c;
          best_s = s;
        }
      }
      cost[sl * cr + sr] = best;
      argmin[sl * cr + sr] = best_s;
    }
  }
  nodes_[n].alive = false;
  edges_[inc[0]].alive = false;
  edges_[inc[1]].alive = false;
  const int e = AddEdge(left, right, std::move(cost));
  log_.push_back(NodeElimination{n, left, right, inc, e, std::move(argmin)});
}

void CostGraph::EliminateEdges(int u, int v) {
  const std::vector<int> between = EdgesBetween(u, v);
  MF_CHECK(between.size() >= 2, ErrorCode::kInvalidArgument, "edge elimination needs parallel edges between ",
           u, " and ", v);
  const int cv = nodes_[v].num_candidates();
  std::vector<double> cost(static_cast<size_t>(nodes_[u].num_candidates()) * cv, 0.0);
  for (int e : between) {
    for (int su = 0; su < nodes_[u].num_candidates(); ++su) {
      for (int sv = 0; sv < cv; ++sv) { cost[su * cv + sv] += EdgeCost(e, u, su, sv); }
    }
    edges_[e].alive = false;
  }
  const int e = AddEdge(u, v, std::move(cost));
  log_.push_back(EdgeElimination{between, e});
}

void CostGraph::EliminateLeaf(int n) {
  MF_CHECK(nodes_.at(n).alive, ErrorCode::kInvalidArgument, "node ", n, " is already eliminated");
  const std::vector<int> inc = IncidentEdges(n);
  MF_CHECK(inc.size() == 1, ErrorCode::kInvalidArgument, "leaf elimination needs degree 1, node ",
           nodes_[n].name, " has degree ", inc.size());
  const int j = Other(edges_[inc[0]], n);
  std::vector<int> argmin(nodes_[j].num_candidates());
  for (int sj = 0; sj < nodes_[j].num_candidates(); ++sj) {
    double best = kInf;
    for (int s = 0; s < nodes_[n].num_candidates(); ++s) {
      const double c = EdgeCost(inc[0], n, s, sj) + nodes_[n].comp[s];
      if (c < best) {
        best = c;
        argmin[sj] = s;
      }
    }
    nodes_[j].comp[sj] += best;
  }
  nodes_[n].alive = false;
  edges_[inc[0]].alive = false;
  log_.push_back(LeafElimination{n, j, inc[0], std::move(argmin)});
}

bool CostGraph::MergeNodes(int alpha) {
  std::vector<int> active;
  for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
    if (nodes_[n].alive && Degree(n) > 0) { active.push_back(n); }
  }
  if (active.size() < 4) { return false; }
  std::vector<std::set<int>> hood(nodes_.size());
  for (int n : active) {
    if (Degree(n) < 3) { return false; }
    const std::vector<int> nb = Neighbors(n);
    hood[n] = std::set<int>(nb.begin(), nb.end());
    hood[n].insert(n);
  }
  int best_i = -1, best_j = -1;
  size_t best_common = 0;
  for (size_t x = 0; x < active.size(); ++x) {
    for (size_t y = x + 1; y < active.size(); ++y) {
      const int i = active[x], j = active[y];
      if (static_cast<int64_t>(nodes_[i].num_candidates()) * nodes_[j].num_candidates() > alpha) { continue; }
      size_t common = 0;
      for (int m : hood[i]) { common += hood[j].count(m); }
      if (best_i < 0 || common > best_common) {
        best_i = i;
        best_j = j;
        best_common = common;
      }
    }
  }
  if (best_i < 0) { return false; }

  const int i = best_i, j = best_j;
  const int ci = nodes_[i].num_candidates(), cj = nodes_[j].num_candidates();
  const std::vector<int> between = EdgesBetween(i, j);
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> comp;
  for (int si = 0; si < ci; ++si) {
    for (int sj = 0; sj < cj; ++sj) {
      double c = nodes_[i].comp[si] + nodes_[j].comp[sj];
      for (int e : between) { c += EdgeCost(e, i, si, sj); }
      pairs.emplace_back(si, sj);
      comp.push_back(c);
    }
  }
  // Drop combinations the edge between them rules out, unless that would
  // leave nothing.
  if (std::any_of(comp.begin(), comp.end(), [](double c) { return std::isfinite(c); })) {
    std::vector<std::pair<int, int>> kept_pairs;
    std::vector<double> kept;
    for (size_t k = 0; k < comp.size(); ++k) {
      if (std::isfinite(comp[k])) {
        kept_pairs.push_back(pairs[k]);
        kept.push_back(comp[k]);
      }
    }
    pairs = std::move(kept_pairs);
    comp = std::move(kept);
  }

  std::vector<int> rewired;
  for (int member : {i, j}) {
    for (int e : IncidentEdges(member)) {
      if (std::find(between.begin(), between.end(), e) == between.end()) { rewired.push_back(e); }
    }
  }
  for (int e : between) { edges_[e].alive = false; }
  nodes_[i].alive = false;
  nodes_[j].alive = false;
  const int m = AddNode(nodes_[i].name + "+" + nodes_[j].name, comp);
  for (int e : rewired) {
    const int member = edges_[e].a == i || edges_[e].a == j ? edges_[e].a : edges_[e].b;
    const int other = Other(edges_[e], member);
    const int co = nodes_[other].num_candidates();
    std::vector<double> cost(pairs.size() * co);
    for (size_t sm = 0; sm < pairs.size(); ++sm) {
      const int s = member == i ? pairs[sm].first : pairs[sm].second;
      for (int so = 0; so < co; ++so) { cost[sm * co + so] = EdgeCost(e, member, s, so); }
    }
    edges_[e].alive = false;
    AddEdge(m, other, std::move(cost));
  }
  log_.push_back(NodeMerge{i, j, m, std::move(pairs)});
  return true;
}

void Simplify(CostGraph& graph, int alpha) {
  auto alive = [&] {
    std::vector<int> out;
    for (int n = 0; n < static_cast<int>(graph.nodes().size()); ++n) {
      if (graph.node(n).alive) { out.push_back(n); }
    }
    return out;
  };
  while (graph.num_alive_nodes() > 1) {
    bool progressed = false;
    for (int u : alive()) {
      for (int v : graph.Neighbors(u)) {
        if (v > u && graph.EdgesBetween(u, v).size() >= 2) {
          graph.EliminateEdges(u, v);
          progressed = true;
          break;
        }
      }
      if (progressed) { break; }
    }
    if (progressed) { continue; }
    for (int n : alive()) {
      if (graph.Degree(n) == 1) {
        graph.EliminateLeaf(n);
        progressed = true;
        break;
      }
    }
    if (progressed) { continue; }
    for (int n : alive()) {
      if (graph.Degree(n) == 2 && graph.Neighbors(n).size() == 2) {
        graph.EliminateNode(n);
        progressed = true;
        break;
      }
    }
    if (progressed) { continue; }
    if (!graph.MergeNodes(alpha)) { break; }
  }
}

GreedyResult GreedySearch(const CostGraph& graph, std::optional<uint64_t> seed) {
  const int n_nodes = static_cast<int>(graph.nodes().size());
  GreedyResult r;
  r.assignment.assign(n_nodes, -1);
  std::mt19937_64 rng(seed.value_or(0));
  for (int n = 0; n < n_nodes; ++n) {
    if (!graph.node(n).alive) { continue; }
    const int c = graph.node(n).num_candidates();
    r.assignment[n] = seed ? std::uniform_int_distribution<int>(0, c - 1)(rng) : 0;
  }
  r.initial_cost = graph.TotalCost(r.assignment);
  double total = r.initial_cost;

  // A node without edges is independent of everything else.
  for (int n = 0; n < n_nodes; ++n) {
    if (graph.node(n).alive && graph.Degree(n) == 0) {
      const int best = ArgMin(graph.node(n).comp);
      if (graph.node(n).comp[best] < graph.node(n).comp[r.assignment[n]]) {
        r.assignment[n] = best;
        ++r.changes;
      }
    }
  }
  total = graph.TotalCost(r.assignment);

  std::vector<std::vector<int>> incident(n_nodes);
  for (int n = 0; n < n_nodes; ++n) {
    if (graph.node(n).alive) { incident[n] = graph.IncidentEdges(n); }
  }
  std::deque<int> worklist;
  std::vector<bool> queued(graph.edges().size(), false);
  for (int e = 0; e < static_cast<int>(graph.edges().size()); ++e) {
    if (graph.edge(e).alive) {
      worklist.push_back(e);
      queued[e] = true;
    }
  }
  std::vector<int>& asg = r.assignment;
  while (!worklist.empty()) {
    const int e = worklist.front();
    worklist.pop_front();
    queued[e] = false;
    const int u = graph.edge(e).a, v = graph.edge(e).b;
    auto local = [&](int su, int sv) {
      double c = graph.node(u).comp[su] + graph.node(v).comp[sv];
      for (int f : incident[u]) {
        const int w = graph.edge(f).a == u ? graph.edge(f).b : graph.edge(f).a;
        c += graph.EdgeCost(f, u, su, w == v ? sv : asg[w]);
      }
      for (int f : incident[v]) {
        const int w = graph.edge(f).a == v ? graph.edge(f).b : graph.edge(f).a;
        if (w != u) { c += graph.EdgeCost(f, v, sv, asg[w]); }
      }
      return c;
    };
    const double current = local(asg[u], asg[v]);
    double best = current;
    int best_u = asg[u], best_v = asg[v];
    for (int su = 0; su < graph.node(u).num_candidates(); ++su) {
      for (int sv = 0; sv < graph.node(v).num_candidates(); ++sv) {
        const double c = local(su, sv);
        if (c < best) {
          best = c;
          best_u = su;
          best_v = sv;
        }
      }
    }
    if (best_u != asg[u] || best_v != asg[v]) {
      asg[u] = best_u;
      asg[v] = best_v;
      ++r.changes;
      total = std::isfinite(current) ? total - current + best : graph.TotalCost(asg);
      for (int n : {u, v}) {
        for (int f : incident[n]) {
          if (!queued[f]) {
            worklist.push_back(f);
            queued[f] = true;
          }
        }
      }
    }
    r.cost_trace.push_back(total);
  }
  r.final_cost = graph.TotalCost(asg);
  return r;
}

std::vector<int> Backtrack(const CostGraph& graph, std::vector<int> assignment) {
  assignment.resize(graph.nodes().size(), -1);
  auto need = [&](int n) {
    MF_CHECK(n >= 0 && n < static_cast<int>(assignment.size()) && assignment[n] >= 0 &&
                 assignment[n] < graph.node(n).num_candidates(),
             ErrorCode::kInvalidArgument, "corrupted elimination log: node ", n, " has no choice");
    return assignment[n];
  };
  const auto& log = graph.log();
  for (auto it = log.rbegin(); it != log.rend(); ++it) {
    if (const auto* ne = std::get_if<NodeElimination>(&*it)) {
      const int cr = graph.node(ne->right).num_candidates();
      assignment[ne->node] = ne->argmin.at(need(ne->left) * cr + need(ne->right));
    } else if (const auto* le = std::get_if<LeafElimination>(&*it)) {
      assignment[le->leaf] = le->argmin.at(need(le->into));
    } else if (const auto* mg = std::get_if<NodeMerge>(&*it)) {
      const auto& [a, b] = mg->pairs.at(need(mg->merged));
      assignment[mg->first] = a;
      assignment[mg->second] = b;
    }
  }
  return assignment;
}

BruteForceResult BruteForce(const CostGraph& graph) {
  std::vector<int> alive;
  int64_t states = 1;
  for (int n = 0; n < static_cast<int>(graph.nodes().size()); ++n) {
    if (!graph.node(n).alive) { continue; }
    alive.push_back(n);
    states *= graph.node(n).num_candidates();
    MF_CHECK(states <= kBruteForceLimit, ErrorCode::kInvalidArgument, "brute force state space exceeds ",
             kBruteForceLimit);
  }
  std::vector<int> asg(graph.nodes().size(), -1);
  for (int n : alive) { asg[n] = 0; }
  BruteForceResult best{kInf, asg};
  while (true) {
    const double c = graph.TotalCost(asg);
    if (c < best.cost) {
      best.cost = c;
      best.assignment = asg;
    }
    int k = static_cast<int>(alive.size()) - 1;
    for (; k >= 0; --k) {
      if (++asg[alive[k]] < graph.node(alive[k]).num_candidates()) { break; }
      asg[alive[k]] = 0;
    }
    if (k < 0) { break; }
  }
  return best;
}

double ComputeCost(const LogicalOp& op, const std::vector<Shape>& input_shapes, const OpSbpSignature& sig,
                   const CostModel& model) {
  if (op.kind.type == OpType::kSource) { return 0.0; }
  std::vector<std::vector<Shape>> local_inputs;
  for (size_t k = 0; k < input_shapes.size(); ++k) {
    local_inputs.push_back(LocalShapes(input_shapes[k], sig.inputs[k], op.placement));
  }
  double busiest = 0;
  for (int d = 0; d < op.placement.size(); ++d) {
    std::vector<Shape> in;
    for (const auto& per_device : local_inputs) { in.push_back(per_device[d]); }
    busiest = std::max(busiest, KernelFlops(op.kind, in));
  }
  return busiest / model.device_speed;
}

StrategyProblem BuildCostGraph(const LogicalGraph& graph, const CostModel& model) {
  Validate(graph);
  const std::map<std::string, Shape> shapes = InferShapes(graph);
  StrategyProblem problem;
  std::map<std::string, int> index;
  for (const LogicalOp& op : graph.ops()) {
    std::vector<Shape> in_shapes;
    for (const std::string& p : graph.Inputs(op.id)) { in_shapes.push_back(shapes.at(p)); }
    std::vector<OpSbpSignature> all = EnumerateSignatures(op.kind, in_shapes, shapes.at(op.id), op.placement);
    std::vector<OpSbpSignature> cands;
    for (const OpSbpSignature& sig : all) {
      bool ok = !op.sbp || sig.output == *op.sbp;
      for (size_t k = 0; ok && k < sig.inputs.size(); ++k) {
        const Transform* t = graph.FindTransform(op.id, static_cast<int>(k));
        if (t) {
          ok = sig.inputs[k] == t->sbp;
        } else if (!op.in_sbp.empty() && op.in_sbp[k]) {
          ok = sig.inputs[k] == *op.in_sbp[k];
        }
      }
      if (ok) { cands.push_back(sig); }
    }
    MF_CHECK(!cands.empty(), ErrorCode::kCompile, "op '", op.id, "' has no valid SBP signature on ",
             op.placement.ToString());
    std::vector<double> comp;
    for (const OpSbpSignature& sig : cands) {
      comp.push_back(ComputeCost(op, in_shapes, sig, model));
    }
    index[op.id] = problem.graph.AddNode(op.id, std::move(comp));
    problem.op_ids.push_back(op.id);
    problem.candidates.push_back(std::move(cands));
  }
  for (const Edge& e : graph.edges()) {
    const int p = index.at(e.producer), c = index.at(e.consumer);
    const LogicalOp& prod = graph.op(e.producer);
    const LogicalOp& cons = graph.op(e.consumer);
    const Transform* t = graph.FindTransform(e.consumer, e.slot);
    const Placement& target = t ? t->placement : cons.placement;
    MF_CHECK(prod.placement == target || prod.placement.Disjoint(target) || prod.placement.SameDevices(target),
             ErrorCode::kCompile, "placements of '", e.producer, "' and '", e.consumer, "' partially overlap");
    const auto& pc = problem.candidates[p];
    const auto& cc = problem.candidates[c];
    std::map<std::pair<NdSbp, NdSbp>, double> memo;
    std::vector<double> cost(pc.size() * cc.size());
    for (size_t sp = 0; sp < pc.size(); ++sp) {
      for (size_t sc = 0; sc < cc.size(); ++sc) {
        const NdSbp& src = pc[sp].output;
        const NdSbp& dst = cc[sc].inputs[e.slot];
        auto it = memo.find({src, dst});
        if (it == memo.end()) {
          const double bytes =
              static_cast<double>(EstimateTransferBytes(shapes.at(e.producer), src, dst, prod.placement, target));
          it = memo.emplace(std::make_pair(src, dst), bytes / model.bandwidth).first;
        }
        cost[sp * cc.size() + sc] = it->second;
      }
    }
    problem.graph.AddEdge(p, c, std::move(cost));
  }
  return problem;
}

Strategy SearchStrategy(const StrategyProblem& problem, const StrategyOptions& options) {
  CostGraph reduced = problem.graph;
  Simplify(reduced, options.alpha);
  const GreedyResult greedy = GreedySearch(reduced, options.seed);
  const std::vector<int> full = Backtrack(reduced, greedy.assignment);
  Strategy s;
  s.reduced_nodes = reduced.num_alive_nodes();
  for (size_t i = 0; i < problem.op_ids.size(); ++i) {
    s.assignment.push_back(full[i]);
    s.signatures[problem.op_ids[i]] = problem.candidates[i][full[i]];
  }
  s.cost = problem.graph.TotalCost(s.assignment);
  return s;
}

void ApplyStrategy(LogicalGraph& graph, const Strategy& strategy) {
  for (LogicalOp& op : graph.mutable_ops()) {
    auto it = strategy.signatures.find(op.id);
    if (it == strategy.signatures.end()) { continue; }
    op.sbp = it->second.output;
    op.in_sbp.assign(it->second.inputs.begin(), it->second.inputs.end());
  }
}

}  // namespace meshflow

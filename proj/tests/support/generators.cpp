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
#include "generators.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "meshflow/sbp.h"

namespace meshflow::testutil {

namespace {

int Pick(std::mt19937_64& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

bool Chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

Placement Flat(std::vector<DeviceCoord> d) { return Placement(std::move(d)); }

// Placement families whose members are pairwise identical, disjoint or
// permutations of each other, so every edge is legal.
std::vector<Placement> PlacementFamily(std::mt19937_64& rng) {
  switch (Pick(rng, 6)) {
    case 0: return {Flat({{0, 0}})};
    case 1: return {Flat({{0, 0}, {0, 1}})};
    case 2: return {Flat({{0, 0}, {0, 1}}), Flat({{1, 0}, {1, 1}})};
    case 3: return {Flat({{0, 0}}), Flat({{0, 1}}), Flat({{1, 0}, {1, 1}})};
    case 4: return {Flat({{0, 0}, {0, 1}}), Flat({{0, 1}, {0, 0}}), Flat({{1, 0}})};
    default:
      return {Placement({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, MeshShape{2, 2}), Flat({{0, 0}, {0, 1}, {1, 0}, {1, 1}})};
  }
}

struct Value {
  std::string id;
  Shape shape;
};

}  // namespace

LogicalGraph RandomGraph(std::mt19937_64& rng, int max_ops) {
  const std::vector<Placement> family = PlacementFamily(rng);
  LogicalGraph g;
  std::vector<Value> values;
  int next = 0;
  auto fresh = [&](const std::string& prefix) { return prefix + std::to_string(next++); };
  auto dim = [&] { return static_cast<int64_t>(2 + Pick(rng, 3)); };

  auto add_op = [&](OpKind kind, const std::vector<std::string>& inputs, const Shape& source_shape) {
    LogicalOp op;
    op.id = fresh(kind.type == OpType::kSource ? "in" : OpTypeName(kind.type));
    op.kind = kind;
    op.placement = family[Pick(rng, static_cast<int>(family.size()))];
    op.shape = source_shape;
    op.ticks = 1 + Pick(rng, 2);
    std::vector<Shape> in_shapes;
    for (const std::string& p : inputs) {
      for (const Value& v : values) {
        if (v.id == p) { in_shapes.push_back(v.shape); }
      }
    }
    const Shape out_shape = kind.type == OpType::kSource ? source_shape : InferKernelShape(kind, in_shapes);
    const std::vector<OpSbpSignature> sigs = EnumerateSignatures(kind, in_shapes, out_shape, op.placement);
    if (sigs.empty()) { return std::string(); }
    const OpSbpSignature& sig = sigs[Pick(rng, static_cast<int>(sigs.size()))];
    op.sbp = sig.output;
    if (!inputs.empty()) { op.in_sbp.assign(sig.inputs.begin(), sig.inputs.end()); }
    const std::string id = op.id;
    g.AddOp(op);
    for (size_t k = 0; k < inputs.size(); ++k) {
      g.AddEdge(inputs[k], id, static_cast<int>(k));
      if (Chance(rng, 0.2)) {
        g.AddTransform({inputs[k], id, static_cast<int>(k), op.placement, sig.inputs[k]});
      }
    }
    values.push_back({id, out_shape});
    return id;
  };
  auto source = [&](const Shape& shape) { return add_op({OpType::kSource, 0}, {}, shape); };
  auto source_or_reuse = [&](const Shape& shape) {
    std::vector<std::string> matches;
    for (const Value& v : values) {
      if (v.shape == shape) { matches.push_back(v.id); }
    }
    if (!matches.empty() && Chance(rng, 0.5)) { return matches[Pick(rng, static_cast<int>(matches.size()))]; }
    return source(shape);
  };

  source({dim(), dim()});
  const int ops = 2 + Pick(rng, std::max(1, max_ops - 2));
  for (int i = 0; i < ops && static_cast<int>(g.ops().size()) < max_ops; ++i) {
    const Value x = values[Pick(rng, static_cast<int>(values.size()))];
    switch (Pick(rng, 5)) {
      case 0:
        if (x.shape.size() == 2) {
          const std::string w = source_or_reuse({x.shape[1], dim()});
          if (!w.empty()) { add_op({OpType::kMatMul, 0}, {x.id, w}, {}); }
        }
        break;
      case 1: {
        const std::string y = source_or_reuse(x.shape);
        if (!y.empty()) { add_op({OpType::kAdd, 0}, {x.id, y}, {}); }
        break;
      }
      case 2: add_op({OpType::kRelu, 0}, {x.id}, {}); break;
      case 3:
        if (!x.shape.empty()) {
          add_op({OpType::kReduceSum, Pick(rng, static_cast<int>(x.shape.size()))}, {x.id}, {});
        }
        break;
      default: add_op({OpType::kIdentity, 0}, {x.id}, {}); break;
    }
  }
  return g;
}

RandomCase RandomPlanCase(uint64_t seed) {
  std::mt19937_64 rng(seed);
  RandomCase c;
  c.graph = RandomGraph(rng);
  c.compile.registers = Chance(rng, 0.25) ? RegisterPolicy::kPlanner : RegisterPolicy::kDefault;
  c.compile.default_slots = 1 + Pick(rng, 3);
  c.run.batches = 1 + Pick(rng, 4);
  c.run.network_latency = Pick(rng, 4);
  c.run.check_invariants = true;
  c.feed_seed = rng();
  return c;
}

CostGraph RandomCostGraph(std::mt19937_64& rng, int max_nodes, int max_candidates, bool connected) {
  CostGraph g;
  const int n = 1 + Pick(rng, max_nodes);
  for (int i = 0; i < n; ++i) {
    std::vector<double> comp(1 + Pick(rng, max_candidates));
    for (double& c : comp) { c = Pick(rng, 10); }
    g.AddNode("n" + std::to_string(i), comp);
  }
  auto add_edge = [&](int a, int b) {
    std::vector<double> cost(g.node(a).comp.size() * g.node(b).comp.size());
    for (double& c : cost) { c = Pick(rng, 20); }
    g.AddEdge(a, b, cost);
  };
  if (connected) {
    for (int i = 1; i < n; ++i) { add_edge(Pick(rng, i), i); }
  }
  const int extra = n > 1 ? Pick(rng, n + 2) : 0;
  for (int e = 0; e < extra; ++e) {
    const int a = Pick(rng, n), b = Pick(rng, n);
    if (a != b) { add_edge(std::min(a, b), std::max(a, b)); }
  }
  return g;
}

StageGraph RandomStageGraph(std::mt19937_64& rng, int max_stages, int devices) {
  StageGraph g;
  g.capacity.assign(devices, 0);
  const int n = 1 + Pick(rng, max_stages);
  for (int i = 0; i < n; ++i) {
    std::vector<int64_t> mem(devices);
    for (int64_t& m : mem) { m = Pick(rng, 20); }
    g.AddStage("s" + std::to_string(i), 1 + Pick(rng, 5), mem);
  }
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      if (Chance(rng, 0.35)) { g.AddEdge(j, i); }
    }
  }
  // Capacity between the all-ones usage and the II=1 usage, so the search
  // has something to do; occasionally below the all-ones floor.
  const std::vector<int64_t> lifetimes = Lifetimes(g);
  for (int k = 0; k < devices; ++k) {
    int64_t lo = 0, hi = 0;
    for (int i = 0; i < n; ++i) {
      lo += g.memory[i][k];
      hi += lifetimes[i] * g.memory[i][k];
    }
    g.capacity[k] = std::uniform_int_distribution<int64_t>(std::max<int64_t>(0, lo - 2), hi)(rng);
  }
  return g;
}

std::vector<std::string> AuditRun(const PhysicalPlan& plan, const RunResult& result) {
  std::vector<std::string> out;
  std::map<std::pair<int, int>, int> live;  // (reg, slot) -> outstanding requests
  std::map<std::pair<int, int>, bool> claimed;
  auto count_busy = [&](int reg) {
    std::set<std::pair<int, int>> busy;
    for (const auto& [key, refs] : live) {
      if (key.first == reg && refs > 0) { busy.insert(key); }
    }
    for (const auto& [key, c] : claimed) {
      if (key.first == reg && c) { busy.insert(key); }
    }
    return static_cast<int>(busy.size());
  };
  for (const SlotEvent& e : result.slot_events) {
    const auto key = std::make_pair(e.reg, e.slot);
    switch (e.kind) {
      case SlotEventKind::kClaim:
        if (live[key] > 0 || claimed[key]) { out.push_back("claimed a busy slot of r" + std::to_string(e.reg)); }
        claimed[key] = true;
        if (count_busy(e.reg) > plan.registers[e.reg].slots) {
          out.push_back("r" + std::to_string(e.reg) + " exceeds its slot credit");
        }
        break;
      case SlotEventKind::kWrite:
        if (live[key] > 0) { out.push_back("write to referenced slot of r" + std::to_string(e.reg)); }
        claimed[key] = false;
        break;
      case SlotEventKind::kReq: ++live[key]; break;
      case SlotEventKind::kAck:
        if (--live[key] < 0) { out.push_back("ack without request on r" + std::to_string(e.reg)); }
        break;
    }
  }
  for (const auto& [key, refs] : live) {
    if (refs != 0) { out.push_back("r" + std::to_string(key.first) + " left referenced"); }
  }

  // Run-ahead: a producer may be at most `slots` actions ahead of the
  // completed actions of each consumer of that register.
  std::map<ActorId, int> index;
  for (size_t a = 0; a < plan.actors.size(); ++a) { index[plan.actors[a].id] = static_cast<int>(a); }
  std::vector<int> fired(plan.actors.size(), 0), done(plan.actors.size(), 0);
  size_t i = 0;
  while (i < result.trace.size()) {
    const int64_t tick = result.trace[i].tick;
    for (; i < result.trace.size() && result.trace[i].tick == tick; ++i) {
      const int a = index.at(result.trace[i].actor);
      (result.trace[i].event == "fire" ? fired : done)[a]++;
    }
    for (const RegisterSpec& r : plan.registers) {
      for (int c : r.consumers) {
        if (fired[r.owner] - done[c] > r.slots) {
          out.push_back("tick " + std::to_string(tick) + ": " + plan.actors[r.owner].name + " runs " +
                        std::to_string(fired[r.owner] - done[c]) + " ahead of " + plan.actors[c].name);
        }
      }
    }
  }
  return out;
}

double CompareOutputs(const RunResult& run, const std::vector<TensorMap>& expected) {
  double worst = 0;
  for (size_t b = 0; b < expected.size(); ++b) {
    for (const auto& [sink, outs] : run.outputs) {
      auto it = expected[b].find(sink);
      if (it == expected[b].end() || outs.size() <= b || outs[b].shape() != it->second.shape()) {
        return std::numeric_limits<double>::infinity();
      }
      worst = std::max(worst, MaxAbsDiff(outs[b], it->second));
    }
  }
  return worst;
}

std::vector<TensorMap> ExpectedOutputs(const LogicalGraph& graph, const FeedSet& feeds, int batches) {
  std::vector<TensorMap> out;
  for (int b = 0; b < batches; ++b) {
    TensorMap f;
    for (const auto& [id, per_batch] : feeds) { f[id] = per_batch[b]; }
    out.push_back(EvalLogical(graph, f));
  }
  return out;
}

}  // namespace meshflow::testutil

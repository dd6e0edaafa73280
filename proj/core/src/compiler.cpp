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
#include "meshflow/compiler.h"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "meshflow/error.h"
#include "meshflow/register_planner.h"

namespace meshflow {

const char* ActorKindName(ActorKind kind) {
  switch (kind) {
    case ActorKind::kSource: return "source";
    case ActorKind::kCompute: return "compute";
    case ActorKind::kBoxing: return "boxing";
    case ActorKind::kNetworking: return "networking";
    case ActorKind::kSink: return "sink";
  }
  return "?";
}

const char* EngineName(Engine engine) {
  switch (engine) {
    case Engine::kCompute: return "compute";
    case Engine::kCopy: return "copy";
    case Engine::kNetwork: return "network";
    case Engine::kHost: return "host";
  }
  return "?";
}

int PhysicalPlan::IndexOf(ActorId id) const {
  for (size_t i = 0; i < actors.size(); ++i) {
    if (actors[i].id == id) { return static_cast<int>(i); }
  }
  return -1;
}

int PhysicalPlan::CountActors(ActorKind kind) const {
  return static_cast<int>(
      std::count_if(actors.begin(), actors.end(), [kind](const ActorSpec& a) { return a.kind == kind; }));
}

namespace {

std::string LayoutKey(const Placement& placement, const NdSbp& sbp) {
  std::string key = placement.ToString() + " " + sbp.ToString();
  if (placement.mesh()) { key += " " + std::to_string(placement.mesh()->rows) + "x" + std::to_string(placement.mesh()->cols); }
  return key;
}

const Placement& InputPlacement(const LogicalGraph& g, const std::string& consumer, int slot) {
  const Transform* t = g.FindTransform(consumer, slot);
  return t ? t->placement : g.op(consumer).placement;
}

void CheckEdgePlacements(const LogicalGraph& g) {
  for (const Transform& t : g.transforms()) {
    MF_CHECK(t.placement == g.op(t.consumer).placement, ErrorCode::kCompile, "transform into '", t.consumer,
             "' targets ", t.placement.ToString(), " but the op runs on ", g.op(t.consumer).placement.ToString());
  }
  for (const Edge& e : g.edges()) {
    const Placement& src = g.op(e.producer).placement;
    const Placement& dst = InputPlacement(g, e.consumer, e.slot);
    MF_CHECK(src.SameDevices(dst) || src.Disjoint(dst), ErrorCode::kCompile, "placements ", src.ToString(),
             " of '", e.producer, "' and ", dst.ToString(), " of '", e.consumer, "' partially overlap");
  }
}

}  // namespace

LogicalGraph CompleteSbp(const LogicalGraph& graph) {
  Validate(graph);
  CheckEdgePlacements(graph);
  const std::map<std::string, Shape> shapes = InferShapes(graph);
  LogicalGraph g = graph;
  for (const std::string& id : TopoSort(graph)) {
    LogicalOp& op = *g.FindMutable(id);
    const Shape& out_shape = shapes.at(id);
    const int depth = op.placement.hierarchy_depth();
    if (op.kind.type == OpType::kSource) {
      const NdSbp sbp = op.sbp.value_or(Uniform(SbpComponent::Broadcast(), depth));
      MF_CHECK(IsValidFor(sbp, out_shape, op.placement), ErrorCode::kCompile, "source '", id, "' cannot use ",
               sbp.ToString(), " for shape ", ShapeToString(out_shape), " on ", op.placement.ToString());
      op.sbp = sbp;
      continue;
    }
    const std::vector<std::string> producers = g.Inputs(id);
    const int arity = static_cast<int>(producers.size());
    std::vector<Shape> in_shapes;
    std::vector<std::optional<NdSbp>> fixed(arity);
    for (int k = 0; k < arity; ++k) {
      in_shapes.push_back(shapes.at(producers[k]));
      if (const Transform* t = g.FindTransform(id, k)) {
        fixed[k] = t->sbp;
      } else if (!op.in_sbp.empty()) {
        fixed[k] = op.in_sbp[k];
      }
    }

    std::optional<OpSbpSignature> chosen;
    // Prefer the signature that needs no boxing at all.
    std::vector<NdSbp> inherited;
    for (int k = 0; k < arity; ++k) {
      const LogicalOp& prod = g.op(producers[k]);
      NdSbp s = fixed[k] ? *fixed[k] : *prod.sbp;
      if (s.depth() != depth || !IsValidFor(s, in_shapes[k], op.placement)) { break; }
      inherited.push_back(std::move(s));
    }
    if (static_cast<int>(inherited.size()) == arity) {
      for (const OpSbpSignature& sig : InferOpSbp(op.kind, inherited)) {
        if ((!op.sbp || sig.output == *op.sbp) && IsValidFor(sig.output, out_shape, op.placement)) {
          chosen = sig;
          break;
        }
      }
    }
    if (!chosen) {
      int64_t best = std::numeric_limits<int64_t>::max();
      for (const OpSbpSignature& sig : EnumerateSignatures(op.kind, in_shapes, out_shape, op.placement)) {
        bool ok = !op.sbp || sig.output == *op.sbp;
        for (int k = 0; ok && k < arity; ++k) { ok = !fixed[k] || sig.inputs[k] == *fixed[k]; }
        if (!ok) { continue; }
        int64_t bytes = 0;
        for (int k = 0; k < arity; ++k) {
          const LogicalOp& prod = g.op(producers[k]);
          bytes += EstimateTransferBytes(in_shapes[k], *prod.sbp, sig.inputs[k], prod.placement, op.placement);
        }
        if (bytes < best) {
          best = bytes;
          chosen = sig;
        }
      }
    }
    MF_CHECK(chosen.has_value(), ErrorCode::kCompile, "no valid SBP signature for op '", id, "' (",
             OpKindToString(op.kind), ") on ", op.placement.ToString());
    op.sbp = chosen->output;
    op.in_sbp.assign(chosen->inputs.begin(), chosen->inputs.end());
  }
  return g;
}

namespace {

class PlanBuilder {
 public:
  PlanBuilder(const LogicalGraph& g, const CompileOptions& options) : g_(g), options_(options) {
    plan_.graph = g;
    shapes_ = InferShapes(g);
  }

  PhysicalPlan Build() {
    for (const std::string& id : TopoSort(g_)) { LowerOp(g_.op(id)); }
    for (const std::string& id : g_.Sinks()) { AddSink(g_.op(id)); }
    RouteCrossNode();
    AssignRegisterCounts();
    AssignThreadsAndIds();
    RebuildConsumers(plan_);
    return std::move(plan_);
  }

  static void RebuildConsumers(PhysicalPlan& plan) {
    for (RegisterSpec& r : plan.registers) { r.consumers.clear(); }
    for (int a = 0; a < static_cast<int>(plan.actors.size()); ++a) {
      for (const auto* list : {&plan.actors[a].inputs, &plan.actors[a].control_inputs}) {
        for (int r : *list) {
          auto& c = plan.registers[r].consumers;
          if (std::find(c.begin(), c.end(), a) == c.end()) { c.push_back(a); }
        }
      }
    }
  }

 private:
  int NewActor(ActorKind kind, std::string name, const std::string& op_id, int node, int device, Engine engine) {
    ActorSpec a;
    a.kind = kind;
    a.name = std::move(name);
    a.op_id = op_id;
    a.node = node;
    a.device = device;
    a.engine = engine;
    plan_.actors.push_back(std::move(a));
    return static_cast<int>(plan_.actors.size()) - 1;
  }

  int NewRegister(int owner, int64_t bytes) {
    RegisterSpec r;
    r.id = static_cast<int>(plan_.registers.size());
    r.owner = owner;
    r.slots = options_.default_slots;
    r.slot_bytes = bytes;
    plan_.registers.push_back(r);
    plan_.actors[owner].outputs.push_back(r.id);
    return r.id;
  }

  static int64_t Bytes(const Shape& s) { return NumElements(s) * static_cast<int64_t>(sizeof(double)); }

  void SetLayout(int a, const LogicalOp& op, int shard) {
    ActorSpec& spec = plan_.actors[a];
    spec.sbp = *op.sbp;
    spec.placement = op.placement;
    spec.global_shape = shapes_.at(op.id);
    spec.shard = shard;
  }

  // Registers that deliver input `slot` of `consumer` to each of its devices.
  std::vector<int> ProvideInput(const LogicalOp& consumer, int slot, const std::string& producer_id) {
    const LogicalOp& prod = g_.op(producer_id);
    const NdSbp& want = *consumer.in_sbp.at(slot);
    std::vector<int> regs;
    if (prod.placement == consumer.placement && *prod.sbp == want) {
      for (int a : op_actors_.at(producer_id)) { regs.push_back(plan_.actors[a].outputs[0]); }
      return regs;
    }
    const std::string key = producer_id + " -> " + LayoutKey(consumer.placement, want);
    auto it = boxing_.find(key);
    if (it == boxing_.end()) {
      const bool same = prod.placement == consumer.placement;
      const DeviceCoord home = same ? prod.placement.device(0) : consumer.placement.device(0);
      const int b = NewActor(ActorKind::kBoxing, "box:" + producer_id + "@" + home.ToString(), producer_id, home.node,
                             home.device, Engine::kCopy);
      ActorSpec& box = plan_.actors[b];
      box.src_sbp = *prod.sbp;
      box.dst_sbp = want;
      box.src_placement = prod.placement;
      box.dst_placement = consumer.placement;
      box.primitive = ChoosePrimitive(box.src_sbp, box.dst_sbp, box.src_placement, box.dst_placement);
      box.global_shape = shapes_.at(producer_id);
      for (int a : op_actors_.at(producer_id)) { plan_.actors[b].inputs.push_back(plan_.actors[a].outputs[0]); }
      for (const Shape& s : LocalShapes(shapes_.at(producer_id), want, consumer.placement)) {
        NewRegister(b, Bytes(s));
      }
      it = boxing_.emplace(key, b).first;
    }
    return plan_.actors[it->second].outputs;
  }

  void LowerOp(const LogicalOp& op) {
    const std::vector<Shape> locals = LocalShapes(shapes_.at(op.id), *op.sbp, op.placement);
    std::vector<std::vector<int>> in_regs;
    const std::vector<std::string> producers = g_.Inputs(op.id);
    for (int k = 0; k < static_cast<int>(producers.size()); ++k) {
      in_regs.push_back(ProvideInput(op, k, producers[k]));
    }
    std::vector<int> actors;
    for (int d = 0; d < op.placement.size(); ++d) {
      const DeviceCoord dev = op.placement.device(d);
      const bool source = op.kind.type == OpType::kSource;
      const int a = NewActor(source ? ActorKind::kSource : ActorKind::kCompute, op.id + "@" + dev.ToString(), op.id,
                             dev.node, dev.device, source ? Engine::kCopy : Engine::kCompute);
      SetLayout(a, op, d);
      plan_.actors[a].op = op.kind;
      plan_.actors[a].ticks = op.ticks;
      plan_.actors[a].workspace = op.workspace;
      for (const auto& regs : in_regs) { plan_.actors[a].inputs.push_back(regs[d]); }
      NewRegister(a, Bytes(locals[d]));
      actors.push_back(a);
    }
    op_actors_[op.id] = std::move(actors);
  }

  void AddSink(const LogicalOp& op) {
    const int node = op.placement.device(0).node;
    const int a = NewActor(ActorKind::kSink, "sink:" + op.id, op.id, node, -1, Engine::kHost);
    SetLayout(a, op, 0);
    for (int p : op_actors_.at(op.id)) { plan_.actors[a].inputs.push_back(plan_.actors[p].outputs[0]); }
  }

  // Every data edge that crosses nodes is pulled by a networking actor on
  // the consumer's node.
  void RouteCrossNode() {
    const int n = static_cast<int>(plan_.actors.size());
    for (int a = 0; a < n; ++a) {
      std::map<int, int> rerouted;
      for (size_t j = 0; j < plan_.actors[a].inputs.size(); ++j) {
        const int r = plan_.actors[a].inputs[j];
        const ActorSpec& owner = plan_.actors[plan_.registers[r].owner];
        const int node = plan_.actors[a].node;
        if (owner.node == node) { continue; }
        auto it = rerouted.find(r);
        if (it == rerouted.end()) {
          const std::string name = "net:" + owner.name + "->" + plan_.actors[a].name;
          const int net = NewActor(ActorKind::kNetworking, name, owner.op_id, node, -1, Engine::kNetwork);
          plan_.actors[net].inputs.push_back(r);
          const int64_t bytes = plan_.registers[r].slot_bytes;
          it = rerouted.emplace(r, NewRegister(net, bytes)).first;
        }
        plan_.actors[a].inputs[j] = it->second;
      }
    }
  }

  void AssignRegisterCounts() {
    if (options_.registers == RegisterPolicy::kDefault) { return; }
    std::vector<DeviceCoord> devices;
    for (const ActorSpec& a : plan_.actors) {
      if (a.device >= 0) { devices.push_back({a.node, a.device}); }
    }
    std::sort(devices.begin(), devices.end());
    devices.erase(std::unique(devices.begin(), devices.end()), devices.end());
    StageGraph stages;
    for (const DeviceCoord& d : devices) {
      auto it = options_.planner_caps.find(d);
      stages.capacity.push_back(it != options_.planner_caps.end() ? it->second
                                                                  : std::numeric_limits<int64_t>::max() / 4);
    }
    for (const ActorSpec& a : plan_.actors) {
      std::vector<int64_t> mem(devices.size(), 0);
      if (a.device >= 0) {
        const size_t k = std::lower_bound(devices.begin(), devices.end(), DeviceCoord{a.node, a.device}) - devices.begin();
        for (int r : a.outputs) { mem[k] += plan_.registers[r].slot_bytes; }
      }
      stages.AddStage(a.name, a.ticks, std::move(mem));
    }
    for (int a = 0; a < static_cast<int>(plan_.actors.size()); ++a) {
      for (int r : plan_.actors[a].inputs) { stages.AddEdge(plan_.registers[r].owner, a); }
    }
    const PipelinePlan pipeline = MinInitiationInterval(stages);
    for (int a = 0; a < static_cast<int>(plan_.actors.size()); ++a) {
      for (int r : plan_.actors[a].outputs) { plan_.registers[r].slots = static_cast<int>(pipeline.counts[a]); }
    }
  }

  void AssignThreadsAndIds() {
    // Per node: device queues in device order (compute before copy), then
    // the node-wide network and host queues.
    std::map<int, std::set<std::tuple<int, int, int>>> keys;  // node -> (device order, engine, device)
    auto key_of = [](const ActorSpec& a) {
      return std::make_tuple(a.device < 0 ? std::numeric_limits<int>::max() : a.device, static_cast<int>(a.engine),
                             a.device);
    };
    for (const ActorSpec& a : plan_.actors) { keys[a.node].insert(key_of(a)); }
    std::map<std::pair<int, std::tuple<int, int, int>>, int> thread_of;
    for (const auto& [node, set] : keys) {
      int t = 0;
      for (const auto& k : set) {
        thread_of[{node, k}] = t;
        plan_.queues.push_back({node, t, std::get<2>(k), static_cast<Engine>(std::get<1>(k))});
        ++t;
      }
    }
    std::map<std::pair<int, int>, uint64_t> seq;
    for (ActorSpec& a : plan_.actors) {
      a.thread = thread_of.at({a.node, key_of(a)});
      a.id = EncodeActorId(a.node, a.thread, seq[{a.node, a.thread}]++);
    }
  }

  const LogicalGraph& g_;
  const CompileOptions& options_;
  PhysicalPlan plan_;
  std::map<std::string, Shape> shapes_;
  std::map<std::string, std::vector<int>> op_actors_;
  std::map<std::string, int> boxing_;
};

std::vector<int> ActorOrderById(const PhysicalPlan& plan) {
  std::vector<int> order(plan.actors.size());
  for (size_t i = 0; i < order.size(); ++i) { order[i] = static_cast<int>(i); }
  std::sort(order.begin(), order.end(), [&](int a, int b) { return plan.actors[a].id < plan.actors[b].id; });
  return order;
}

// Successors over data and control edges.
std::vector<std::vector<int>> Successors(const PhysicalPlan& plan) {
  std::vector<std::vector<int>> succ(plan.actors.size());
  for (int a = 0; a < static_cast<int>(plan.actors.size()); ++a) {
    for (const auto* list : {&plan.actors[a].inputs, &plan.actors[a].control_inputs}) {
      for (int r : *list) {
        if (r >= 0 && r < static_cast<int>(plan.registers.size())) { succ[plan.registers[r].owner].push_back(a); }
      }
    }
  }
  return succ;
}

}  // namespace

PhysicalPlan Compile(const LogicalGraph& graph, const CompileOptions& options) {
  MF_CHECK(options.default_slots >= 1, ErrorCode::kInvalidArgument, "register slot count must be >= 1");
  const LogicalGraph completed = CompleteSbp(graph);
  return PlanBuilder(completed, options).Build();
}

std::map<DeviceCoord, int64_t> StaticRegisterBytes(const PhysicalPlan& plan) {
  std::map<DeviceCoord, int64_t> bytes;
  for (const RegisterSpec& r : plan.registers) {
    const ActorSpec& owner = plan.actors[r.owner];
    if (owner.device >= 0) { bytes[{owner.node, owner.device}] += r.slots * r.slot_bytes; }
  }
  return bytes;
}

void InsertControlEdges(PhysicalPlan& plan, const MemoryCaps& caps) {
  const std::map<DeviceCoord, int64_t> statics = StaticRegisterBytes(plan);
  const int n = static_cast<int>(plan.actors.size());

  // Topological order over data and control edges, preferring small
  // workspaces so the serial order is smallest-memory-first.
  const std::vector<std::vector<int>> succ = Successors(plan);
  std::vector<int> indeg(n, 0);
  for (const auto& s : succ) {
    for (int b : s) { ++indeg[b]; }
  }
  using Item = std::pair<std::pair<int64_t, ActorId>, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  for (int a = 0; a < n; ++a) {
    if (indeg[a] == 0) { ready.push({{plan.actors[a].workspace, plan.actors[a].id}, a}); }
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int a = ready.top().second;
    ready.pop();
    order.push_back(a);
    for (int b : succ[a]) {
      if (--indeg[b] == 0) { ready.push({{plan.actors[b].workspace, plan.actors[b].id}, b}); }
    }
  }
  MF_CHECK(static_cast<int>(order.size()) == n, ErrorCode::kCompile, "plan has a dependency cycle");

  for (const auto& [dev, cap] : caps) {
    auto sit = statics.find(dev);
    const int64_t stat = sit == statics.end() ? 0 : sit->second;
    MF_CHECK(stat <= cap, ErrorCode::kCapacity, "registers on ", dev.ToString(), " need ", stat,
             " bytes but the device has ", cap);
    std::vector<int> hungry;
    int64_t total = 0;
    for (int a : order) {
      const ActorSpec& s = plan.actors[a];
      if (s.workspace > 0 && s.device == dev.device && s.node == dev.node) {
        MF_CHECK(stat + s.workspace <= cap, ErrorCode::kCapacity, "actor ", s.name, " needs ", s.workspace,
                 " bytes of workspace but only ", cap - stat, " remain on ", dev.ToString());
        hungry.push_back(a);
        total += s.workspace;
      }
    }
    if (stat + total <= cap) { continue; }

    // Each earlier actor gates every later one; since a slot is recycled
    // only when its consumer finishes, batch b+1 of the first actor waits
    // for batch b of the last, which makes the group fully serial.
    for (size_t i = 0; i < hungry.size(); ++i) {
      for (size_t j = i + 1; j < hungry.size(); ++j) {
        const int a = hungry[i], b = hungry[j];
        RegisterSpec r;
        r.id = static_cast<int>(plan.registers.size());
        r.owner = a;
        r.slots = 1;
        r.slot_bytes = 0;
        r.control = true;
        r.consumers = {b};
        plan.registers.push_back(r);
        plan.actors[a].control_outputs.push_back(r.id);
        plan.actors[b].control_inputs.push_back(r.id);
      }
    }
  }
}

std::vector<std::string> ValidatePlan(const PhysicalPlan& plan) {
  std::vector<std::string> errors;
  auto report = [&](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    errors.push_back(os.str());
  };
  const int n = static_cast<int>(plan.actors.size());
  const int nr = static_cast<int>(plan.registers.size());
  std::set<ActorId> ids;
  std::set<std::pair<int, int>> queues;
  for (const QueueSpec& q : plan.queues) { queues.insert({q.node, q.thread}); }
  for (int a = 0; a < n; ++a) {
    const ActorSpec& s = plan.actors[a];
    if (!ids.insert(s.id).second) { report("duplicate actor id ", ActorIdHex(s.id)); }
    const ActorAddress addr = ParseActorId(s.id);
    if (static_cast<int>(addr.node) != s.node || static_cast<int>(addr.thread) != s.thread) {
      report("actor ", s.name, " id ", ActorIdHex(s.id), " does not encode node ", s.node, " thread ", s.thread);
    }
    if (!queues.count({s.node, s.thread})) { report("actor ", s.name, " runs on unmapped thread ", s.thread); }
    if (s.ticks < 1) { report("actor ", s.name, " has ticks < 1"); }
    for (const auto* list : {&s.inputs, &s.control_inputs, &s.outputs, &s.control_outputs}) {
      for (int r : *list) {
        if (r < 0 || r >= nr) { report("actor ", s.name, " references unknown register ", r); }
      }
    }
    for (int r : s.outputs) {
      if (r >= 0 && r < nr && (plan.registers[r].owner != a || plan.registers[r].control)) {
        report("actor ", s.name, " lists register r", r, " it does not own as data output");
      }
    }
    for (int r : s.inputs) {
      if (r < 0 || r >= nr) { continue; }
      const RegisterSpec& reg = plan.registers[r];
      const auto& c = reg.consumers;
      if (std::find(c.begin(), c.end(), a) == c.end()) {
        report("actor ", s.name, " reads r", r, " but is not among its consumers");
      }
      const ActorSpec& owner = plan.actors[reg.owner];
      if (owner.node != s.node && s.kind != ActorKind::kNetworking) {
        report("cross-node edge ", owner.name, " -> ", s.name, " has no networking actor");
      }
    }
    if (s.kind == ActorKind::kNetworking) {
      if (s.inputs.size() != 1 || s.outputs.size() != 1) {
        report("networking actor ", s.name, " must have one input and one output");
      } else if (s.inputs[0] >= 0 && s.inputs[0] < nr && plan.actors[plan.registers[s.inputs[0]].owner].node == s.node) {
        report("networking actor ", s.name, " pulls from its own node");
      }
    }
  }
  for (const RegisterSpec& r : plan.registers) {
    if (r.slots < 1) { report("register r", r.id, " has slot count ", r.slots); }
    if (r.owner < 0 || r.owner >= n) {
      report("register r", r.id, " has no owner");
      continue;
    }
    for (int c : r.consumers) {
      if (c < 0 || c >= n) {
        report("register r", r.id, " lists unknown consumer");
        continue;
      }
      const ActorSpec& s = plan.actors[c];
      const auto& list = r.control ? s.control_inputs : s.inputs;
      if (std::find(list.begin(), list.end(), r.id) == list.end()) {
        report("register r", r.id, " lists ", s.name, " which never reads it");
      }
    }
  }
  // Data and control edges together must stay acyclic.
  const std::vector<std::vector<int>> succ = Successors(plan);
  std::vector<int> indeg(n, 0);
  for (const auto& s : succ) {
    for (int b : s) { ++indeg[b]; }
  }
  std::vector<int> ready;
  for (int a = 0; a < n; ++a) {
    if (indeg[a] == 0) { ready.push_back(a); }
  }
  int seen = 0;
  while (!ready.empty()) {
    const int a = ready.back();
    ready.pop_back();
    ++seen;
    for (int b : succ[a]) {
      if (--indeg[b] == 0) { ready.push_back(b); }
    }
  }
  if (seen != n) { report("data and control edges form a cycle"); }
  return errors;
}

std::string DumpPlan(const PhysicalPlan& plan) {
  std::ostringstream os;
  os << "queues " << plan.queues.size() << "\n";
  for (const QueueSpec& q : plan.queues) {
    os << "queue node=" << q.node << " thread=" << q.thread << " device=" << q.device
       << " engine=" << EngineName(q.engine) << "\n";
  }
  os << "actors " << plan.actors.size() << "\n";
  auto hex_of = [&](int a) { return ActorIdHex(plan.actors[a].id); };
  for (int a : ActorOrderById(plan)) {
    const ActorSpec& s = plan.actors[a];
    os << "actor " << hex_of(a) << " " << ActorKindName(s.kind) << " " << s.name << " op=" << s.op_id
       << " node=" << s.node << " device=" << s.device << " thread=" << s.thread << " engine=" << EngineName(s.engine)
       << " ticks=" << s.ticks << " workspace=" << s.workspace << "\n";
    if (s.kind == ActorKind::kCompute) { os << "  kernel " << OpKindToString(s.op) << "\n"; }
    if (s.kind == ActorKind::kSource || s.kind == ActorKind::kCompute || s.kind == ActorKind::kSink) {
      os << "  layout sbp=" << s.sbp.ToString() << " placement=" << s.placement.ToString()
         << " shape=" << ShapeToString(s.global_shape) << " shard=" << s.shard << "\n";
    }
    if (s.kind == ActorKind::kBoxing) {
      os << "  boxing " << BoxingPrimitiveName(s.primitive) << " " << s.src_sbp.ToString() << s.src_placement.ToString()
         << " -> " << s.dst_sbp.ToString() << s.dst_placement.ToString() << "\n";
    }
    for (int r : s.inputs) { os << "  in r" << r << " <- " << hex_of(plan.registers[r].owner) << "\n"; }
    for (int r : s.control_inputs) { os << "  ctrl-in r" << r << " <- " << hex_of(plan.registers[r].owner) << "\n"; }
    for (const auto* list : {&s.outputs, &s.control_outputs}) {
      for (int r : *list) {
        const RegisterSpec& reg = plan.registers[r];
        os << "  " << (reg.control ? "ctrl-out" : "out") << " r" << r << " slots=" << reg.slots
           << " bytes=" << reg.slot_bytes << " ->";
        for (int c : reg.consumers) { os << " " << hex_of(c); }
        os << "\n";
      }
    }
  }
  return os.str();
}

}  // namespace meshflow

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
#include "meshflow/runtime.h"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "meshflow/error.h"

namespace meshflow {

FeedSet MakeFeeds(const LogicalGraph& graph, int batches, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FeedSet feeds;
  for (const LogicalOp& op : graph.ops()) {
    if (op.kind.type != OpType::kSource) { continue; }
    std::vector<Tensor>& per_batch = feeds[op.id];
    for (int b = 0; b < batches; ++b) {
      if (op.value) {
        per_batch.push_back(*op.value);
        continue;
      }
      std::vector<double> data(NumElements(op.shape));
      for (double& v : data) { v = normal(rng); }
      per_batch.emplace_back(op.shape, std::move(data));
    }
  }
  return feeds;
}

std::string FormatTrace(const std::vector<TraceEvent>& trace) {
  std::ostringstream os;
  for (const TraceEvent& e : trace) {
    os << e.tick << "\t" << ActorIdHex(e.actor) << "\t" << e.event << "\t" << e.batch << "\n";
  }
  return os.str();
}

std::vector<TraceEvent> ParseTrace(std::string_view text) {
  std::vector<TraceEvent> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) { continue; }
    std::istringstream fields(line);
    TraceEvent e;
    std::string hex;
    if (!(fields >> e.tick >> hex >> e.event >> e.batch) || hex.rfind("0x", 0) != 0) {
      throw ParseError(line_no, 1, "expected tick, actor id, event and batch");
    }
    e.actor = std::stoull(hex.substr(2), nullptr, 16);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

using TensorPtr = std::shared_ptr<const Tensor>;

struct Message {
  enum class Type { kReq, kAck };
  Type type = Type::kReq;
  int to = 0;
  int from = 0;
  int reg = 0;
  int slot = 0;
  int batch = 0;
  TensorPtr value;
};

struct Slot {
  TensorPtr value;
  int batch = -1;
  int refcount = 0;
  bool claimed = false;
};

struct RegState {
  std::vector<Slot> slots;
  int out_counter = 0;
  int64_t reqs = 0;
  int64_t acks = 0;
};

struct InEntry {
  int reg = 0;
  int slot = 0;
  int batch = 0;
  TensorPtr value;
};

struct ActorState {
  std::vector<int> in_regs;       // distinct data registers, then control registers
  std::vector<int> data_pos;      // input position -> index into in_regs
  std::vector<int> out_regs;      // data outputs, then control outputs
  std::vector<std::deque<InEntry>> fifo;
  int started = 0;
  int completed = 0;
  bool busy = false;
  int64_t done_at = 0;
  int batch = -1;
  std::vector<InEntry> holding;
  std::vector<int> claimed;
  std::vector<TensorPtr> results;
  int64_t reserved = 0;  // device bytes held for the current action
};

// Device memory: a fixed register share plus dynamic workspace and, in
// eager mode, dynamically allocated outputs.
class DeviceMemory {
 public:
  DeviceMemory(const PhysicalPlan& plan, const RunOptions& options) {
    for (const auto& [dev, cap] : options.memory_caps) { free_[dev] = cap; }
    if (options.allocation == AllocationMode::kCounters) {
      for (const auto& [dev, bytes] : StaticRegisterBytes(plan)) {
        auto it = free_.find(dev);
        if (it == free_.end()) { continue; }
        MF_CHECK(bytes <= it->second, ErrorCode::kCapacity, "registers on ", dev.ToString(), " need ", bytes,
                 " bytes but the device has ", it->second);
        it->second -= bytes;
      }
    }
  }

  bool TryReserve(const DeviceCoord& dev, int64_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = free_.find(dev);
    if (it == free_.end() || bytes == 0) { return true; }
    if (bytes > it->second) { return false; }
    it->second -= bytes;
    return true;
  }

  void Release(const DeviceCoord& dev, int64_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = free_.find(dev);
    if (it != free_.end()) { it->second += bytes; }
  }

  int64_t Free(const DeviceCoord& dev) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = free_.find(dev);
    return it == free_.end() ? -1 : it->second;
  }

 private:
  std::mutex mu_;
  std::map<DeviceCoord, int64_t> free_;
};

class Machine {
 public:
  Machine(const PhysicalPlan& plan, const FeedSet& feeds, const RunOptions& options, bool record)
      : plan_(plan), options_(options), record_(record), eager_(options.allocation == AllocationMode::kEager),
        memory_(plan, options), actors_(plan.actors.size()), regs_(plan.registers.size()),
        sink_outputs_(plan.actors.size()) {
    MF_CHECK(options.batches >= 0, ErrorCode::kInvalidArgument, "batch count must be >= 0");
    for (size_t r = 0; r < plan.registers.size(); ++r) {
      MF_CHECK(plan.registers[r].slots >= 1, ErrorCode::kInvalidArgument, "register r", r, " has no slots");
      regs_[r].slots.resize(plan.registers[r].slots);
      regs_[r].out_counter = plan.registers[r].slots;
    }
    for (size_t a = 0; a < plan.actors.size(); ++a) {
      const ActorSpec& spec = plan.actors[a];
      ActorState& st = actors_[a];
      for (int r : spec.inputs) {
        auto it = std::find(st.in_regs.begin(), st.in_regs.end(), r);
        st.data_pos.push_back(static_cast<int>(it - st.in_regs.begin()));
        if (it == st.in_regs.end()) { st.in_regs.push_back(r); }
      }
      for (int r : spec.control_inputs) { st.in_regs.push_back(r); }
      st.fifo.resize(st.in_regs.size());
      st.out_regs = spec.outputs;
      st.out_regs.insert(st.out_regs.end(), spec.control_outputs.begin(), spec.control_outputs.end());
      if (spec.kind == ActorKind::kSource) { PrepareSource(static_cast<int>(a), feeds); }
    }
  }

  int size() const { return static_cast<int>(actors_.size()); }
  const ActorState& state(int a) const { return actors_[a]; }
  bool AllDone() const { return done_actors_.load() == size(); }
  int64_t done_actors() const { return done_actors_.load(); }
  int64_t bytes_moved() const { return bytes_moved_.load(); }

  // Inputs and batch budget permit an action; in counter mode every out
  // register also needs a free slot.
  bool Eligible(int a) const {
    const ActorState& st = actors_[a];
    if (st.busy || st.started >= options_.batches) { return false; }
    for (const auto& q : st.fifo) {
      if (q.empty()) { return false; }
    }
    if (!eager_) {
      for (int r : st.out_regs) {
        if (regs_[r].out_counter <= 0) { return false; }
      }
    }
    return true;
  }

  // Bytes an action of `a` must obtain on its device before it starts.
  int64_t ActionBytes(int a) const {
    const ActorSpec& spec = plan_.actors[a];
    int64_t bytes = spec.workspace;
    if (eager_) {
      for (int r : spec.outputs) { bytes += plan_.registers[r].slot_bytes; }
    }
    return bytes;
  }

  bool TryReserve(int a) {
    const ActorSpec& spec = plan_.actors[a];
    if (spec.device < 0) { return true; }
    const int64_t bytes = ActionBytes(a);
    if (!memory_.TryReserve({spec.node, spec.device}, bytes)) { return false; }
    actors_[a].reserved = spec.workspace;
    return true;
  }

  void Fire(int a, int64_t tick) {
    const ActorSpec& spec = plan_.actors[a];
    ActorState& st = actors_[a];
    if (!eager_ && !TryReserve(a)) {
      Throw(ErrorCode::kOutOfMemory, "out of memory on ", DeviceCoord{spec.node, spec.device}.ToString(), ": ",
            spec.name, " needs ", spec.workspace, " bytes of workspace, ",
            memory_.Free({spec.node, spec.device}), " free");
    }
    st.batch = st.started;
    st.holding.clear();
    for (auto& q : st.fifo) {
      MF_CHECK(q.front().batch == st.batch, ErrorCode::kProtocol, spec.name, " expected batch ", st.batch,
               " but register r", q.front().reg, " delivered batch ", q.front().batch);
      st.holding.push_back(std::move(q.front()));
      q.pop_front();
    }
    st.results = Execute(a);
    st.claimed.clear();
    for (int r : st.out_regs) {
      RegState& reg = regs_[r];
      int s = 0;
      while (s < static_cast<int>(reg.slots.size()) && (reg.slots[s].claimed || reg.slots[s].refcount > 0)) { ++s; }
      if (s == static_cast<int>(reg.slots.size())) {
        MF_CHECK(eager_, ErrorCode::kProtocol, spec.name, " has out credit on r", r, " but no free slot");
        reg.slots.emplace_back();
      }
      reg.slots[s].claimed = true;
      --reg.out_counter;
      st.claimed.push_back(s);
      LogSlot(tick, SlotEventKind::kClaim, a, r, s, st.batch);
    }
    ++st.started;
    st.busy = true;
    st.done_at = tick + spec.ticks;
    if (record_) { trace_.push_back({tick, spec.id, "fire", st.batch}); }
  }

  void Complete(int a, int64_t tick, std::vector<Message>& out) {
    const ActorSpec& spec = plan_.actors[a];
    ActorState& st = actors_[a];
    for (size_t k = 0; k < st.out_regs.size(); ++k) {
      const int r = st.out_regs[k];
      RegState& reg = regs_[r];
      Slot& slot = reg.slots[st.claimed[k]];
      if (slot.refcount != 0) {
        violations_.push_back("write to r" + std::to_string(r) + " slot " + std::to_string(st.claimed[k]) +
                              " while it is still referenced");
      }
      slot.value = k < st.results.size() ? st.results[k] : nullptr;
      slot.batch = st.batch;
      slot.claimed = false;
      LogSlot(tick, SlotEventKind::kWrite, a, r, st.claimed[k], st.batch);
      const std::vector<int>& consumers = plan_.registers[r].consumers;
      if (consumers.empty()) {
        FreeSlot(r, st.claimed[k]);
        continue;
      }
      slot.refcount = static_cast<int>(consumers.size());
      for (int c : consumers) {
        out.push_back({Message::Type::kReq, c, a, r, st.claimed[k], st.batch, slot.value});
        ++reg.reqs;
        LogSlot(tick, SlotEventKind::kReq, a, r, st.claimed[k], st.batch);
      }
    }
    for (const InEntry& in : st.holding) {
      out.push_back({Message::Type::kAck, plan_.registers[in.reg].owner, a, in.reg, in.slot, in.batch, nullptr});
    }
    st.holding.clear();
    if (spec.device >= 0 && st.reserved > 0) { memory_.Release({spec.node, spec.device}, st.reserved); }
    st.reserved = 0;
    st.results.clear();
    st.busy = false;
    if (++st.completed == options_.batches) { ++done_actors_; }
    if (record_) { trace_.push_back({tick, spec.id, "done", st.batch}); }
  }

  void Deliver(const Message& m, int64_t tick) {
    if (m.type == Message::Type::kReq) {
      ActorState& st = actors_[m.to];
      auto it = std::find(st.in_regs.begin(), st.in_regs.end(), m.reg);
      MF_CHECK(it != st.in_regs.end(), ErrorCode::kProtocol, plan_.actors[m.to].name, " got a request for r", m.reg,
               " it does not read");
      st.fifo[it - st.in_regs.begin()].push_back({m.reg, m.slot, m.batch, m.value});
      return;
    }
    RegState& reg = regs_[m.reg];
    Slot& slot = reg.slots.at(m.slot);
    MF_CHECK(slot.refcount > 0, ErrorCode::kProtocol, "ack underflow on r", m.reg, " slot ", m.slot, " from ",
             plan_.actors[m.from].name);
    ++reg.acks;
    LogSlot(tick, SlotEventKind::kAck, m.from, m.reg, m.slot, m.batch);
    if (--slot.refcount == 0) { FreeSlot(m.reg, m.slot); }
  }

  std::vector<std::string> CheckCounters() const {
    std::vector<std::string> out;
    for (size_t r = 0; r < regs_.size(); ++r) {
      const RegState& reg = regs_[r];
      int referenced = 0, claimed = 0;
      for (const Slot& s : reg.slots) {
        if (s.refcount < 0) { out.push_back("negative refcount on r" + std::to_string(r)); }
        referenced += s.refcount > 0;
        claimed += s.claimed;
      }
      const int c = plan_.registers[r].slots;
      if (reg.out_counter < 0 || reg.out_counter > c) {
        out.push_back("out counter of r" + std::to_string(r) + " is " + std::to_string(reg.out_counter));
      }
      if (reg.out_counter + referenced + claimed != c) {
        out.push_back("credit leak on r" + std::to_string(r) + ": " + std::to_string(reg.out_counter) + " + " +
                      std::to_string(referenced) + " + " + std::to_string(claimed) + " != " + std::to_string(c));
      }
    }
    return out;
  }

  std::vector<std::string> CheckQuiescent() const {
    std::vector<std::string> out;
    for (size_t r = 0; r < regs_.size(); ++r) {
      const RegState& reg = regs_[r];
      if (reg.reqs != reg.acks) {
        out.push_back("r" + std::to_string(r) + " saw " + std::to_string(reg.reqs) + " requests but " +
                      std::to_string(reg.acks) + " acks");
      }
      for (const Slot& s : reg.slots) {
        if (s.refcount != 0) { out.push_back("r" + std::to_string(r) + " still referenced at exit"); }
      }
      if (!eager_ && reg.out_counter != plan_.registers[r].slots) {
        out.push_back("r" + std::to_string(r) + " ends with out counter " + std::to_string(reg.out_counter));
      }
    }
    return out;
  }

  std::string WaitGraph() const {
    std::ostringstream os;
    os << "wait graph:\n";
    for (int a = 0; a < size(); ++a) {
      const ActorSpec& spec = plan_.actors[a];
      const ActorState& st = actors_[a];
      if (st.completed >= options_.batches) { continue; }
      os << "  " << ActorIdHex(spec.id) << " " << spec.name << " (batch " << st.started << ")";
      bool waiting = false;
      for (size_t k = 0; k < st.fifo.size(); ++k) {
        if (st.fifo[k].empty()) {
          const int owner = plan_.registers[st.in_regs[k]].owner;
          os << " waits-input r" << st.in_regs[k] << "<-" << plan_.actors[owner].name;
          waiting = true;
        }
      }
      for (int r : st.out_regs) {
        if (!eager_ && regs_[r].out_counter == 0) {
          os << " waits-credit r" << r << "->";
          for (int c : plan_.registers[r].consumers) { os << plan_.actors[c].name << ","; }
          waiting = true;
        }
      }
      if (!waiting && eager_ && spec.device >= 0) {
        os << " waits-memory " << ActionBytes(a) << " bytes on " << DeviceCoord{spec.node, spec.device}.ToString()
           << " (" << const_cast<DeviceMemory&>(memory_).Free({spec.node, spec.device}) << " free)";
      }
      os << "\n";
    }
    return os.str();
  }

  std::map<std::string, std::vector<Tensor>> Outputs() const {
    std::map<std::string, std::vector<Tensor>> out;
    for (int a = 0; a < size(); ++a) {
      if (plan_.actors[a].kind == ActorKind::kSink) { out[plan_.actors[a].op_id] = sink_outputs_[a]; }
    }
    return out;
  }

  std::vector<RegisterStats> Stats() const {
    std::vector<RegisterStats> out;
    for (size_t r = 0; r < regs_.size(); ++r) {
      RegisterStats s{plan_.registers[r].slots, regs_[r].out_counter, regs_[r].reqs, regs_[r].acks, {}};
      for (const Slot& slot : regs_[r].slots) { s.refcounts.push_back(slot.refcount); }
      out.push_back(std::move(s));
    }
    return out;
  }

  std::vector<TraceEvent> TakeTrace() { return std::move(trace_); }
  std::vector<SlotEvent> TakeSlotEvents() { return std::move(slot_events_); }
  std::vector<std::string>& violations() { return violations_; }

 private:
  void PrepareSource(int a, const FeedSet& feeds) {
    const ActorSpec& spec = plan_.actors[a];
    auto it = feeds.find(spec.op_id);
    MF_CHECK(it != feeds.end(), ErrorCode::kInvalidArgument, "no feed for source '", spec.op_id, "'");
    MF_CHECK(static_cast<int>(it->second.size()) >= options_.batches, ErrorCode::kInvalidArgument, "source '",
             spec.op_id, "' has ", it->second.size(), " batches, ", options_.batches, " requested");
    auto& per_batch = source_shards_[spec.op_id];
    if (!per_batch.empty()) { return; }
    for (int b = 0; b < options_.batches; ++b) {
      const Tensor& global = it->second[b];
      MF_CHECK(global.shape() == spec.global_shape, ErrorCode::kShape, "feed for '", spec.op_id, "' has shape ",
               ShapeToString(global.shape()), ", expected ", ShapeToString(spec.global_shape));
      std::vector<TensorPtr> shards;
      for (Tensor& t : Materialize(global, spec.sbp, spec.placement)) {
        shards.push_back(std::make_shared<const Tensor>(std::move(t)));
      }
      per_batch.push_back(std::move(shards));
    }
  }

  std::vector<TensorPtr> Execute(int a) {
    const ActorSpec& spec = plan_.actors[a];
    const ActorState& st = actors_[a];
    std::vector<Tensor> inputs;
    for (int pos : st.data_pos) { inputs.push_back(*st.holding[pos].value); }
    switch (spec.kind) {
      case ActorKind::kSource: return {source_shards_.at(spec.op_id).at(st.batch).at(spec.shard)};
      case ActorKind::kCompute: return {std::make_shared<const Tensor>(ApplyKernel(spec.op, inputs))};
      case ActorKind::kNetworking:
        bytes_moved_ += inputs[0].bytes();
        return {std::make_shared<const Tensor>(inputs[0])};
      case ActorKind::kBoxing: {
        BoxingResult r = ApplyBoxing(inputs, spec.src_sbp, spec.dst_sbp, spec.src_placement, spec.dst_placement);
        bytes_moved_ += r.bytes_moved;
        std::vector<TensorPtr> out;
        for (Tensor& t : r.locals) { out.push_back(std::make_shared<const Tensor>(std::move(t))); }
        return out;
      }
      case ActorKind::kSink: {
        auto& slot = sink_outputs_[a];
        if (static_cast<int>(slot.size()) <= st.batch) { slot.resize(st.batch + 1); }
        slot[st.batch] = Reconstruct(inputs, spec.sbp, spec.placement);
        return {};
      }
    }
    return {};
  }

  void FreeSlot(int r, int s) {
    ++regs_[r].out_counter;
    if (eager_) {
      const ActorSpec& owner = plan_.actors[plan_.registers[r].owner];
      if (owner.device >= 0 && !plan_.registers[r].control) {
        memory_.Release({owner.node, owner.device}, plan_.registers[r].slot_bytes);
      }
    }
    (void)s;
  }

  void LogSlot(int64_t tick, SlotEventKind kind, int actor, int reg, int slot, int batch) {
    if (record_) { slot_events_.push_back({tick, kind, actor, reg, slot, batch}); }
  }

  const PhysicalPlan& plan_;
  const RunOptions& options_;
  const bool record_;
  const bool eager_;
  DeviceMemory memory_;
  std::vector<ActorState> actors_;
  std::vector<RegState> regs_;
  std::map<std::string, std::vector<std::vector<TensorPtr>>> source_shards_;
  std::vector<std::vector<Tensor>> sink_outputs_;
  std::atomic<int64_t> done_actors_{0};
  std::atomic<int64_t> bytes_moved_{0};
  std::vector<TraceEvent> trace_;
  std::vector<SlotEvent> slot_events_;
  std::vector<std::string> violations_;
};

std::vector<int> IdOrder(const PhysicalPlan& plan) {
  std::vector<int> order(plan.actors.size());
  for (size_t i = 0; i < order.size(); ++i) { order[i] = static_cast<int>(i); }
  std::sort(order.begin(), order.end(), [&](int a, int b) { return plan.actors[a].id < plan.actors[b].id; });
  return order;
}

void CheckTargets(const PhysicalPlan& plan) {
  for (const RegisterSpec& r : plan.registers) {
    for (int c : r.consumers) {
      MF_CHECK(c >= 0 && c < static_cast<int>(plan.actors.size()), ErrorCode::kRouting, "register r", r.id,
               " routes to an unknown actor");
    }
  }
}

RunResult RunDeterministic(const PhysicalPlan& plan, const FeedSet& feeds, const RunOptions& options) {
  Machine m(plan, feeds, options, true);
  const std::vector<int> order = IdOrder(plan);

  // Same-thread messages are handled at once; other threads of the node
  // drain their FIFO later in the tick; remote nodes see them after the
  // network latency.
  std::map<std::pair<int, int>, std::deque<Message>> thread_queues;
  std::deque<std::pair<int64_t, Message>> network;
  auto route = [&](const Message& msg, int64_t tick) {
    const ActorSpec& from = plan.actors[msg.from];
    const ActorSpec& to = plan.actors.at(msg.to);
    if (from.node != to.node) {
      network.emplace_back(tick + options.network_latency, msg);
    } else if (from.thread == to.thread) {
      m.Deliver(msg, tick);
    } else {
      thread_queues[{to.node, to.thread}].push_back(msg);
    }
  };

  std::map<std::pair<int, int>, std::vector<int>> queue_actors;
  std::map<std::pair<int, int>, std::deque<int>> ready;
  std::vector<bool> in_ready(plan.actors.size(), false);
  for (int a : order) { queue_actors[{plan.actors[a].node, plan.actors[a].thread}].push_back(a); }

  RunResult result;
  int64_t tick = 0;
  std::vector<Message> out;
  while (true) {
    MF_CHECK(tick <= options.max_ticks, ErrorCode::kRuntime, "run exceeded ", options.max_ticks, " ticks");
    for (int a : order) {
      if (m.state(a).busy && m.state(a).done_at == tick) {
        out.clear();
        m.Complete(a, tick, out);
        for (const Message& msg : out) { route(msg, tick); }
      }
    }
    while (!network.empty() && network.front().first <= tick) {
      m.Deliver(network.front().second, tick);
      network.pop_front();
    }
    for (auto& [key, q] : thread_queues) {
      while (!q.empty()) {
        m.Deliver(q.front(), tick);
        q.pop_front();
      }
    }

    int fired = 0;
    if (options.allocation == AllocationMode::kCounters) {
      for (int a : order) {
        if (m.Eligible(a)) {
          m.Fire(a, tick);
          ++fired;
        }
      }
    } else {
      // One action at a time per queue, started strictly in arrival order:
      // a head that cannot get memory blocks everything behind it.
      for (auto& [key, actors] : queue_actors) {
        bool queue_busy = false;
        for (int a : actors) { queue_busy = queue_busy || m.state(a).busy; }
        auto& q = ready[key];
        for (int a : actors) {
          if (!in_ready[a] && m.Eligible(a)) {
            q.push_back(a);
            in_ready[a] = true;
          }
        }
        if (queue_busy || q.empty()) { continue; }
        const int head = q.front();
        if (m.TryReserve(head)) {
          q.pop_front();
          in_ready[head] = false;
          m.Fire(head, tick);
          ++fired;
        }
      }
    }

    if (options.check_invariants && options.allocation == AllocationMode::kCounters) {
      for (std::string& v : m.CheckCounters()) { result.violations.push_back("tick " + std::to_string(tick) + ": " + v); }
    }
    bool any_busy = false;
    for (int a : order) { any_busy = any_busy || m.state(a).busy; }
    if (m.AllDone() && !any_busy && network.empty()) { break; }
    if (fired == 0 && !any_busy && network.empty()) {
      Throw(ErrorCode::kDeadlock, "deadlock at tick ", tick, "\n", m.WaitGraph());
    }
    ++tick;
  }
  result.ticks = tick;
  if (options.check_invariants) {
    for (std::string& v : m.CheckQuiescent()) { result.violations.push_back(std::move(v)); }
  }
  for (std::string& v : m.violations()) { result.violations.push_back(std::move(v)); }
  result.outputs = m.Outputs();
  result.trace = m.TakeTrace();
  result.slot_events = m.TakeSlotEvents();
  result.registers = m.Stats();
  result.bytes_moved = m.bytes_moved();
  return result;
}

// Multi-producer single-consumer mailbox.
class Mailbox {
 public:
  void Push(Message m) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      q_.push_back(std::move(m));
    }
    cv_.notify_one();
  }

  // Waits up to `timeout` for mail, then takes everything queued.
  std::deque<Message> Take(std::chrono::milliseconds timeout, const std::atomic<bool>& stop) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !q_.empty() || stop.load(); });
    std::deque<Message> out;
    out.swap(q_);
    return out;
  }

  void Wake() { cv_.notify_all(); }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> q_;
};

RunResult RunThreaded(const PhysicalPlan& plan, const FeedSet& feeds, const RunOptions& options) {
  MF_CHECK(options.allocation == AllocationMode::kCounters, ErrorCode::kInvalidArgument,
           "eager allocation is only available in deterministic mode");
  Machine m(plan, feeds, options, false);
  const std::vector<int> order = IdOrder(plan);

  std::map<std::pair<int, int>, int> worker_of;
  std::vector<std::vector<int>> worker_actors;
  for (int a : order) {
    const auto key = std::make_pair(plan.actors[a].node, plan.actors[a].thread);
    auto it = worker_of.find(key);
    if (it == worker_of.end()) {
      it = worker_of.emplace(key, static_cast<int>(worker_actors.size())).first;
      worker_actors.emplace_back();
    }
    worker_actors[it->second].push_back(a);
  }
  std::vector<int> actor_worker(plan.actors.size());
  for (size_t w = 0; w < worker_actors.size(); ++w) {
    for (int a : worker_actors[w]) { actor_worker[a] = static_cast<int>(w); }
  }
  std::map<int, int> node_index;
  for (const ActorSpec& a : plan.actors) { node_index.emplace(a.node, static_cast<int>(node_index.size())); }

  std::vector<Mailbox> inbox(worker_actors.size());
  std::vector<Mailbox> commnet(node_index.size());
  std::atomic<bool> stop{false};
  std::atomic<int64_t> in_flight{0};
  std::atomic<int64_t> progress{0};
  std::mutex error_mu;
  std::exception_ptr error;
  auto fail = [&](std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(error_mu);
    if (!error) { error = e; }
    stop = true;
  };
  auto wake_all = [&] {
    for (auto& b : inbox) { b.Wake(); }
    for (auto& b : commnet) { b.Wake(); }
  };

  auto worker = [&](int w) {
    try {
      std::deque<Message> local;
      auto route = [&](const Message& msg) {
        ++in_flight;
        const ActorSpec& from = plan.actors[msg.from];
        const ActorSpec& to = plan.actors.at(msg.to);
        if (actor_worker[msg.to] == w) {
          local.push_back(msg);
        } else if (from.node == to.node) {
          inbox[actor_worker[msg.to]].Push(msg);
        } else {
          commnet[node_index.at(to.node)].Push(msg);
        }
      };
      std::vector<Message> out;
      while (!stop) {
        bool worked = false;
        for (Message& msg : inbox[w].Take(std::chrono::milliseconds(0), stop)) { local.push_back(std::move(msg)); }
        while (!local.empty()) {
          m.Deliver(local.front(), 0);
          local.pop_front();
          --in_flight;
          worked = true;
        }
        for (int a : worker_actors[w]) {
          if (m.Eligible(a)) {
            m.Fire(a, 0);
            out.clear();
            m.Complete(a, 0, out);
            for (const Message& msg : out) { route(msg); }
            ++progress;
            worked = true;
          }
        }
        if (!worked) {
          for (Message& msg : inbox[w].Take(std::chrono::milliseconds(20), stop)) { local.push_back(std::move(msg)); }
        }
      }
    } catch (...) {
      fail(std::current_exception());
      wake_all();
    }
  };
  // Per-node network forwarder: hands remote messages to the receiving thread.
  auto forwarder = [&](int node) {
    while (!stop) {
      for (Message& msg : commnet[node].Take(std::chrono::milliseconds(20), stop)) {
        inbox[actor_worker[msg.to]].Push(std::move(msg));
      }
    }
  };

  std::vector<std::thread> threads;
  for (size_t w = 0; w < worker_actors.size(); ++w) { threads.emplace_back(worker, static_cast<int>(w)); }
  for (size_t n = 0; n < commnet.size(); ++n) { threads.emplace_back(forwarder, static_cast<int>(n)); }

  auto last_change = std::chrono::steady_clock::now();
  int64_t last_progress = -1;
  bool timed_out = false;
  while (!stop) {
    if (m.AllDone() && in_flight.load() == 0) { break; }
    const int64_t p = progress.load() + in_flight.load() * 1000003;
    if (p != last_progress) {
      last_progress = p;
      last_change = std::chrono::steady_clock::now();
    } else if (std::chrono::steady_clock::now() - last_change > options.watchdog) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  stop = true;
  wake_all();
  for (std::thread& t : threads) { t.join(); }
  if (error) { std::rethrow_exception(error); }
  if (timed_out) {
    Throw(ErrorCode::kDeadlock, "no progress for ", options.watchdog.count(), " ms\n", m.WaitGraph());
  }
  RunResult result;
  if (options.check_invariants) { result.violations = m.CheckQuiescent(); }
  for (std::string& v : m.violations()) { result.violations.push_back(std::move(v)); }
  result.outputs = m.Outputs();
  result.registers = m.Stats();
  result.bytes_moved = m.bytes_moved();
  return result;
}

}  // namespace

RunResult Run(const PhysicalPlan& plan, const FeedSet& feeds, const RunOptions& options) {
  MF_CHECK(options.network_latency >= 0, ErrorCode::kInvalidArgument, "network latency must be >= 0");
  CheckTargets(plan);
  if (options.mode == RunMode::kThreaded) { return RunThreaded(plan, feeds, options); }
  return RunDeterministic(plan, feeds, options);
}

}  // namespace meshflow

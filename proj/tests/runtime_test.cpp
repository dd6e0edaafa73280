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

#include <map>
#include <random>

#include "generators.h"
#include "meshflow/compiler.h"
#include "meshflow/error.h"
#include "meshflow/graph_text.h"
#include "meshflow/register_planner.h"
#include "meshflow/runtime.h"

namespace meshflow {
namespace {

LogicalGraph LoadData(const std::string& name) { return LoadGraphFile(std::string(MESHFLOW_DATA_DIR) + "/" + name); }

// Actors of a linear plan from the source to the sink.
std::vector<int> ChainOrder(const PhysicalPlan& plan) {
  int a = -1;
  for (size_t i = 0; i < plan.actors.size(); ++i) {
    if (plan.actors[i].kind == ActorKind::kSource) { a = static_cast<int>(i); }
  }
  std::vector<int> order;
  while (a >= 0) {
    order.push_back(a);
    const std::vector<int>& out = plan.actors[a].outputs;
    a = out.empty() ? -1 : plan.registers[out[0]].consumers.at(0);
  }
  return order;
}

// Fire tick of every (stage, batch) of a linear chain. A stage starts a batch
// once its input has arrived, its previous batch is done and the consumer has
// released the slot used `slots` batches earlier; messages between nodes take
// `latency` ticks each way.
std::vector<std::vector<int64_t>> ChainSchedule(const PhysicalPlan& plan, const std::vector<int>& order,
                                                int batches, int latency) {
  const int n = static_cast<int>(order.size());
  std::vector<std::vector<int64_t>> fire(n, std::vector<int64_t>(batches)), done = fire;
  auto lat = [&](int k) { return plan.actors[order[k]].node != plan.actors[order[k + 1]].node ? latency : 0; };
  for (int b = 0; b < batches; ++b) {
    for (int k = 0; k < n; ++k) {
      int64_t t = 0;
      if (k > 0) { t = std::max(t, done[k - 1][b] + lat(k - 1)); }
      if (b > 0) { t = std::max(t, done[k][b - 1]); }
      if (k + 1 < n) {
        const int slots = plan.registers[plan.actors[order[k]].outputs[0]].slots;
        if (b >= slots) { t = std::max(t, done[k + 1][b - slots] + lat(k)); }
      }
      fire[k][b] = t;
      done[k][b] = t + plan.actors[order[k]].ticks;
    }
  }
  return fire;
}

std::map<std::pair<ActorId, int>, int64_t> FireTicks(const RunResult& r) {
  std::map<std::pair<ActorId, int>, int64_t> out;
  for (const TraceEvent& e : r.trace) {
    if (e.event == "fire") { out[{e.actor, e.batch}] = e.tick; }
  }
  return out;
}

void ExpectMatchesSchedule(const PhysicalPlan& plan, int batches, int latency, const std::string& label) {
  const std::vector<int> order = ChainOrder(plan);
  RunOptions opts;
  opts.batches = batches;
  opts.network_latency = latency;
  opts.check_invariants = true;
  const RunResult r = meshflow::Run(plan, MakeFeeds(plan.graph, batches, 1), opts);
  EXPECT_TRUE(r.violations.empty()) << label;
  EXPECT_TRUE(testutil::AuditRun(plan, r).empty()) << label;
  const auto fired = FireTicks(r);
  const auto expected = ChainSchedule(plan, order, batches, latency);
  ASSERT_EQ(fired.size(), order.size() * batches) << label;
  for (size_t k = 0; k < order.size(); ++k) {
    for (int b = 0; b < batches; ++b) {
      EXPECT_EQ(fired.at({plan.actors[order[k]].id, b}), expected[k][b])
          << label << " stage " << plan.actors[order[k]].name << " batch " << b;
    }
  }
  EXPECT_EQ(r.ticks, expected.back().back() + plan.actors[order.back()].ticks) << label;
}

constexpr char kChain[] =
    "op x source placement={0:[0]} shape=[2]\n"
    "op a relu placement={0:[0]}\n"
    "op b identity placement={0:[0]}\n"
    "edge x -> a:0\n"
    "edge a -> b:0\n";

TEST(RuntimeTest, SourceToSink) {
  const PhysicalPlan plan = Compile(ParseGraphText(
      "op x source placement={0:[0]} shape=[3]\n"
      "op y identity placement={0:[0]}\n"
      "edge x -> y:0\n"));
  const FeedSet feeds = MakeFeeds(plan.graph, 3, 5);
  RunOptions opts;
  opts.batches = 3;
  opts.check_invariants = true;
  const RunResult r = meshflow::Run(plan, feeds, opts);
  ASSERT_EQ(r.outputs.at("y").size(), 3u);
  for (int b = 0; b < 3; ++b) { EXPECT_EQ(r.outputs.at("y")[b], feeds.at("x")[b]); }
  EXPECT_TRUE(r.violations.empty());
  for (const RegisterStats& s : r.registers) {
    EXPECT_EQ(s.reqs, s.acks);
    EXPECT_EQ(s.out_counter, s.slots);
  }
  EXPECT_EQ(r.bytes_moved, 0);
}

TEST(RuntimeTest, FlowControlPipelinesAChain) {
  PhysicalPlan plan = Compile(ParseGraphText(kChain));
  const std::vector<int> order = ChainOrder(plan);
  ASSERT_EQ(order.size(), 4u);
  const int slots[] = {3, 2, 2};
  for (int k = 0; k < 3; ++k) { plan.registers[plan.actors[order[k]].outputs[0]].slots = slots[k]; }
  ExpectMatchesSchedule(plan, 20, 1, "chain");

  RunOptions opts;
  opts.batches = 20;
  const auto fired = FireTicks(meshflow::Run(plan, MakeFeeds(plan.graph, 20, 1), opts));
  // Each stage first becomes eligible one tick after its producer, then
  // processes one batch per tick.
  for (int k = 0; k < 4; ++k) {
    for (int b = 0; b < 20; ++b) { EXPECT_EQ(fired.at({plan.actors[order[k]].id, b}), k + b); }
  }

  // A single slot halves the throughput of the stage that owns it.
  plan.registers[plan.actors[order[1]].outputs[0]].slots = 1;
  const auto slow = FireTicks(meshflow::Run(plan, MakeFeeds(plan.graph, 20, 1), opts));
  EXPECT_EQ(slow.at({plan.actors[order[1]].id, 19}) - slow.at({plan.actors[order[1]].id, 18}), 2);
}

TEST(RuntimeTest, NetworkLatency) {
  const PhysicalPlan plan = Compile(ParseGraphText(
      "op x source placement={0:[0]} shape=[2] sbp=B\n"
      "op y identity placement={1:[0]} sbp=B\n"
      "edge x -> y:0\n"));
  ASSERT_EQ(plan.CountActors(ActorKind::kNetworking), 1);
  for (int latency : {0, 1, 3}) { ExpectMatchesSchedule(plan, 6, latency, "latency " + std::to_string(latency)); }
  RunOptions opts;
  opts.network_latency = 3;
  const RunResult r = meshflow::Run(plan, MakeFeeds(plan.graph, 1, 1), opts);
  // One boxing copy onto the consumer placement plus one network pull.
  EXPECT_EQ(plan.CountActors(ActorKind::kBoxing), 1);
  EXPECT_EQ(r.bytes_moved, 2 * 16);
}

TEST(RuntimeTest, RandomChainsMatchSchedule) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 60; ++i) {
    const int ops = 1 + static_cast<int>(rng() % 4);
    std::string text = "op x0 source placement={" + std::to_string(rng() % 2) + ":[0]} shape=[2] sbp=B\n";
    for (int k = 1; k <= ops; ++k) {
      text += "op x" + std::to_string(k) + " relu placement={" + std::to_string(rng() % 2) +
              ":[0]} sbp=B ticks=" + std::to_string(1 + rng() % 3) + "\n";
      text += "edge x" + std::to_string(k - 1) + " -> x" + std::to_string(k) + ":0\n";
    }
    CompileOptions copts;
    copts.default_slots = 1 + static_cast<int>(rng() % 3);
    PhysicalPlan plan = Compile(ParseGraphText(text), copts);
    for (RegisterSpec& r : plan.registers) { r.slots = 1 + static_cast<int>(rng() % 3); }
    ExpectMatchesSchedule(plan, 1 + static_cast<int>(rng() % 8), static_cast<int>(rng() % 4), text);
  }
}

TEST(RuntimeTest, BackPressureBoundsRunAhead) {
  PhysicalPlan plan = Compile(ParseGraphText(
      "op x source placement={0:[0]} shape=[2]\n"
      "op a relu placement={0:[0]}\n"
      "op b identity placement={0:[0]} ticks=5\n"
      "edge x -> a:0\n"
      "edge a -> b:0\n"));
  const std::vector<int> order = ChainOrder(plan);
  RunOptions opts;
  opts.batches = 12;
  const RunResult r = meshflow::Run(plan, MakeFeeds(plan.graph, 12, 1), opts);
  EXPECT_TRUE(testutil::AuditRun(plan, r).empty());
  // The source can be at most slots(x) + slots(a) batches ahead of the slow stage.
  const int bound = plan.registers[plan.actors[order[0]].outputs[0]].slots +
                    plan.registers[plan.actors[order[1]].outputs[0]].slots;
  std::map<ActorId, int> fired, done;
  for (const TraceEvent& e : r.trace) {
    (e.event == "fire" ? fired : done)[e.actor] = e.batch + 1;
    EXPECT_LE(fired[plan.actors[order[0]].id] - done[plan.actors[order[2]].id], bound + 1);
  }
}

TEST(RuntimeTest, PlannerCountsSustainTheInterval) {
  // Stage view of the chain: lifetimes 4, 3, 2 for x, a, b (the sink
  // holds no device memory); 16-byte registers.
  StageGraph stages;
  stages.capacity = {80};
  for (const char* name : {"x", "a", "b", "sink"}) { stages.AddStage(name, 1, {std::string(name) == "sink" ? 0 : 16}); }
  for (int i = 0; i < 3; ++i) { stages.AddEdge(i, i + 1); }
  const PipelinePlan pp = MinInitiationInterval(stages);
  ASSERT_EQ(pp.ii, 2);

  CompileOptions copts;
  copts.registers = RegisterPolicy::kPlanner;
  copts.planner_caps = {{{0, 0}, 80}};
  const PhysicalPlan plan = Compile(ParseGraphText(kChain), copts);
  const std::vector<int> order = ChainOrder(plan);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(plan.registers[plan.actors[order[k]].outputs[0]].slots, pp.counts[k]);
  }
  EXPECT_LE(StaticRegisterBytes(plan).at({0, 0}), 80);
  RunOptions opts;
  opts.batches = 20;
  const auto fired = FireTicks(meshflow::Run(plan, MakeFeeds(plan.graph, 20, 1), opts));
  const ActorId src = plan.actors[order[0]].id;
  EXPECT_EQ(fired.at({src, 19}) - fired.at({src, 18}), pp.ii);

  copts.planner_caps = {{{0, 0}, 1 << 20}};
  const PhysicalPlan fast = Compile(ParseGraphText(kChain), copts);
  const auto fast_fired = FireTicks(meshflow::Run(fast, MakeFeeds(fast.graph, 20, 1), opts));
  const ActorId fsrc = fast.actors[ChainOrder(fast)[0]].id;
  EXPECT_EQ(fast_fired.at({fsrc, 19}) - fast_fired.at({fsrc, 18}), 1);
}

template<typename F>
ErrorCode CodeOf(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kInvalidArgument;
}

TEST(RuntimeTest, MemoryPressure) {
  const PhysicalPlan base = Compile(LoadData("graph_executor.mfg"));
  const int64_t stat = StaticRegisterBytes(base).at({0, 0});
  RunOptions opts;
  opts.batches = 4;
  opts.memory_caps = {{{0, 0}, stat + 72}};
  opts.check_invariants = true;
  const FeedSet feeds = MakeFeeds(base.graph, 16, 3);

  EXPECT_EQ(CodeOf([&] { meshflow::Run(base, feeds, opts); }), ErrorCode::kOutOfMemory);

  PhysicalPlan ordered = base;
  InsertControlEdges(ordered, opts.memory_caps);
  const RunResult r = meshflow::Run(ordered, feeds, opts);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(testutil::CompareOutputs(r, testutil::ExpectedOutputs(base.graph, feeds, 4)), 0);

  RunOptions eager = opts;
  eager.allocation = AllocationMode::kEager;
  eager.batches = 16;
  eager.memory_caps = {{{0, 0}, 200}};
  try {
    meshflow::Run(base, feeds, eager);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDeadlock);
    EXPECT_NE(std::string(e.what()).find("waits-memory"), std::string::npos) << e.what();
  }

  RunOptions tiny = opts;
  tiny.memory_caps = {{{0, 0}, stat - 1}};
  EXPECT_EQ(CodeOf([&] { meshflow::Run(ordered, feeds, tiny); }), ErrorCode::kCapacity);

  eager.mode = RunMode::kThreaded;
  EXPECT_EQ(CodeOf([&] { meshflow::Run(base, feeds, eager); }), ErrorCode::kInvalidArgument);
}

TEST(RuntimeTest, DeadlockAndRoutingErrors) {
  const PhysicalPlan base = Compile(ParseGraphText(kChain));
  const std::vector<int> order = ChainOrder(base);
  const FeedSet feeds = MakeFeeds(base.graph, 2, 1);
  RunOptions opts;
  opts.batches = 2;

  // b gates a, but a feeds b.
  PhysicalPlan cyclic = base;
  RegisterSpec ctrl;
  ctrl.id = static_cast<int>(cyclic.registers.size());
  ctrl.owner = order[2];
  ctrl.control = true;
  ctrl.consumers = {order[1]};
  cyclic.registers.push_back(ctrl);
  cyclic.actors[order[2]].control_outputs.push_back(ctrl.id);
  cyclic.actors[order[1]].control_inputs.push_back(ctrl.id);
  for (RunMode mode : {RunMode::kDeterministic, RunMode::kThreaded}) {
    opts.mode = mode;
    opts.watchdog = std::chrono::milliseconds(200);
    try {
      meshflow::Run(cyclic, feeds, opts);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDeadlock);
      EXPECT_NE(std::string(e.what()).find("waits-input"), std::string::npos) << e.what();
    }
  }

  PhysicalPlan lost = base;
  lost.registers[0].consumers.push_back(999);
  opts.mode = RunMode::kDeterministic;
  EXPECT_EQ(CodeOf([&] { meshflow::Run(lost, feeds, opts); }), ErrorCode::kRouting);

  PhysicalPlan empty = base;
  empty.registers[0].slots = 0;
  EXPECT_EQ(CodeOf([&] { meshflow::Run(empty, feeds, opts); }), ErrorCode::kInvalidArgument);
}

TEST(RuntimeTest, ThreadedMatchesDeterministic) {
  const PhysicalPlan plan = Compile(LoadData("api_demo.mfg"));
  const FeedSet feeds = MakeFeeds(plan.graph, 6, 9);
  RunOptions opts;
  opts.batches = 6;
  opts.check_invariants = true;
  const RunResult det = meshflow::Run(plan, feeds, opts);
  EXPECT_LE(testutil::CompareOutputs(det, testutil::ExpectedOutputs(plan.graph, feeds, 6)), 1e-9);
  EXPECT_EQ(det.bytes_moved, 768 * 6);
  opts.mode = RunMode::kThreaded;
  for (int rep = 0; rep < 5; ++rep) {
    const RunResult thr = meshflow::Run(plan, feeds, opts);
    EXPECT_TRUE(thr.violations.empty());
    EXPECT_EQ(thr.outputs, det.outputs);
    EXPECT_EQ(thr.bytes_moved, det.bytes_moved);
  }
}

TEST(TraceTest, RoundTrip) {
  const PhysicalPlan plan = Compile(LoadData("api_demo.mfg"));
  RunOptions opts;
  opts.batches = 2;
  const RunResult r = meshflow::Run(plan, MakeFeeds(plan.graph, 2, 1), opts);
  const std::string text = FormatTrace(r.trace);
  EXPECT_EQ(ParseTrace(text), r.trace);
  EXPECT_EQ(text.substr(0, text.find('\n')), "0\t" + ActorIdHex(r.trace[0].actor) + "\tfire\t0");
  EXPECT_THROW(ParseTrace("0\tzz\tfire\t0\n"), Error);
}

}  // namespace
}  // namespace meshflow

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
#ifndef MESHFLOW_RUNTIME_H_
#define MESHFLOW_RUNTIME_H_

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "meshflow/compiler.h"
#include "meshflow/plan.h"
#include "meshflow/tensor.h"

namespace meshflow {

enum class RunMode { kDeterministic, kThreaded };

// kCounters is the register protocol: every register is preallocated and an
// actor needs a free slot in each out register before it may act. kEager
// drops the quota and allocates outputs on demand, with one action at a
// time per hardware queue; it exists to reproduce executor deadlocks.
enum class AllocationMode { kCounters, kEager };

// Per source op, one global tensor per batch.
using FeedSet = std::map<std::string, std::vector<Tensor>>;

// Constant sources repeat their value; others draw standard normal values.
FeedSet MakeFeeds(const LogicalGraph& graph, int batches, uint64_t seed);

struct RunOptions {
  int batches = 1;
  RunMode mode = RunMode::kDeterministic;
  int network_latency = 1;  // ticks per cross-node message
  MemoryCaps memory_caps;   // devices not listed are unbounded
  AllocationMode allocation = AllocationMode::kCounters;
  bool check_invariants = false;
  std::chrono::milliseconds watchdog{10000};
  int64_t max_ticks = 10000000;
};

struct TraceEvent {
  int64_t tick = 0;
  ActorId actor = 0;
  std::string event;  // fire | done
  int batch = 0;

  bool operator==(const TraceEvent&) const = default;
};

enum class SlotEventKind { kClaim, kWrite, kReq, kAck };

struct SlotEvent {
  int64_t tick = 0;
  SlotEventKind kind = SlotEventKind::kClaim;
  int actor = 0;  // actor index that caused the event
  int reg = 0;
  int slot = 0;
  int batch = 0;
};

struct RegisterStats {
  int slots = 0;
  int out_counter = 0;
  int64_t reqs = 0;
  int64_t acks = 0;
  std::vector<int> refcounts;
};

struct RunResult {
  std::map<std::string, std::vector<Tensor>> outputs;  // sink op -> per batch
  std::vector<TraceEvent> trace;                        // deterministic mode only
  std::vector<SlotEvent> slot_events;                   // deterministic mode only
  std::vector<RegisterStats> registers;                 // final state
  std::vector<std::string> violations;                  // when check_invariants is set
  int64_t ticks = 0;
  int64_t bytes_moved = 0;  // boxing plus networking
};

// Throws kDeadlock (with a wait-graph dump), kOutOfMemory, kCapacity,
// kProtocol or kRouting errors.
RunResult Run(const PhysicalPlan& plan, const FeedSet& feeds, const RunOptions& options);

// `tick<TAB>actor_hex<TAB>event<TAB>batch` per line.
std::string FormatTrace(const std::vector<TraceEvent>& trace);
std::vector<TraceEvent> ParseTrace(std::string_view text);

}  // namespace meshflow

#endif  // MESHFLOW_RUNTIME_H_

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
#ifndef MESHFLOW_PLAN_H_
#define MESHFLOW_PLAN_H_

#include <map>
#include <string>
#include <vector>

#include "meshflow/actor_id.h"
#include "meshflow/boxing.h"
#include "meshflow/graph.h"

namespace meshflow {

enum class ActorKind { kSource, kCompute, kBoxing, kNetworking, kSink };
enum class Engine { kCompute, kCopy, kNetwork, kHost };

const char* ActorKindName(ActorKind kind);
const char* EngineName(Engine engine);

// A fixed set of slots owned by one actor. Control registers carry no data
// and only order their owner before their consumers.
struct RegisterSpec {
  int id = 0;
  int owner = 0;  // actor index
  int slots = 1;
  int64_t slot_bytes = 0;
  bool control = false;
  std::vector<int> consumers;  // distinct actor indices
};

// One simulated hardware queue, served by a dedicated thread.
struct QueueSpec {
  int node = 0;
  int thread = 0;
  int device = -1;  // -1 for node-wide queues
  Engine engine = Engine::kCompute;
};

struct ActorSpec {
  ActorId id = 0;
  ActorKind kind = ActorKind::kCompute;
  std::string name;
  std::string op_id;
  int node = 0;
  int device = -1;
  Engine engine = Engine::kCompute;
  int thread = 0;

  std::vector<int> inputs;  // data registers, in argument order
  std::vector<int> control_inputs;
  std::vector<int> outputs;  // data registers
  std::vector<int> control_outputs;

  int ticks = 1;
  int64_t workspace = 0;

  // Compute: kernel. Source, compute, sink: layout of the logical tensor the
  // actor produces (or, for a sink, collects) and this actor's shard index.
  OpKind op;
  NdSbp sbp;
  Placement placement;
  Shape global_shape;
  int shard = 0;

  // Boxing: inputs follow src_placement order, outputs dst_placement order.
  BoxingPrimitive primitive = BoxingPrimitive::kIdentity;
  NdSbp src_sbp, dst_sbp;
  Placement src_placement, dst_placement;
};

struct PhysicalPlan {
  LogicalGraph graph;  // with every SBP annotation resolved
  std::vector<ActorSpec> actors;
  std::vector<RegisterSpec> registers;
  std::vector<QueueSpec> queues;

  int IndexOf(ActorId id) const;  // -1 when unknown
  int CountActors(ActorKind kind) const;
};

}  // namespace meshflow

#endif  // MESHFLOW_PLAN_H_

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
#ifndef MESHFLOW_COMPILER_H_
#define MESHFLOW_COMPILER_H_

#include <map>
#include <string>
#include <vector>

#include "meshflow/graph.h"
#include "meshflow/plan.h"

namespace meshflow {

enum class RegisterPolicy { kDefault, kPlanner };

using MemoryCaps = std::map<DeviceCoord, int64_t>;

struct CompileOptions {
  RegisterPolicy registers = RegisterPolicy::kDefault;
  int default_slots = 2;
  // Capacities handed to the register planner; devices not listed are
  // treated as unbounded.
  MemoryCaps planner_caps;
};

// Fills in every op's output and input annotations. Declared annotations
// are kept and checked; missing ones are inherited from producers, or picked
// as the cheapest valid signature when inheritance fails.
LogicalGraph CompleteSbp(const LogicalGraph& graph);

PhysicalPlan Compile(const LogicalGraph& graph, const CompileOptions& options = {});

// Empty when the plan is well formed.
std::vector<std::string> ValidatePlan(const PhysicalPlan& plan);

// Orders workspace-hungry actors on devices whose memory cannot hold all of
// them at once, smallest workspace first.
void InsertControlEdges(PhysicalPlan& plan, const MemoryCaps& caps);

// Bytes of all register slots owned by actors on each device.
std::map<DeviceCoord, int64_t> StaticRegisterBytes(const PhysicalPlan& plan);

std::string DumpPlan(const PhysicalPlan& plan);

}  // namespace meshflow

#endif  // MESHFLOW_COMPILER_H_

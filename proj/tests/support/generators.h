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
#ifndef MESHFLOW_TESTS_SUPPORT_GENERATORS_H_
#define MESHFLOW_TESTS_SUPPORT_GENERATORS_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "meshflow/auto_parallel.h"
#include "meshflow/compiler.h"
#include "meshflow/graph.h"
#include "meshflow/register_planner.h"
#include "meshflow/runtime.h"

namespace meshflow::testutil {

// Random shape-consistent graph of at most `max_ops` ops on up to two nodes
// with two devices each. Every op carries a signature drawn from the
// inference tables; some edges get explicit transforms.
LogicalGraph RandomGraph(std::mt19937_64& rng, int max_ops = 8);

// Compile options and run settings drawn alongside a random graph.
struct RandomCase {
  LogicalGraph graph;
  CompileOptions compile;
  RunOptions run;
  uint64_t feed_seed = 0;
};
RandomCase RandomPlanCase(uint64_t seed);

// Cost graph with integer costs so sums are exact. `connected` adds a
// spanning tree before the extra random edges.
CostGraph RandomCostGraph(std::mt19937_64& rng, int max_nodes, int max_candidates, bool connected = true);

StageGraph RandomStageGraph(std::mt19937_64& rng, int max_stages, int devices);

// Violations of the register protocol visible in a deterministic run's
// slot log and trace: writes to referenced slots, more live slots than
// credit, and producers running further ahead of a consumer than the
// register between them allows.
std::vector<std::string> AuditRun(const PhysicalPlan& plan, const RunResult& result);

// Max |a - b| over all sinks and batches; +inf when the sets differ.
double CompareOutputs(const RunResult& run, const std::vector<TensorMap>& expected);

// EvalLogical per batch on the same feeds.
std::vector<TensorMap> ExpectedOutputs(const LogicalGraph& graph, const FeedSet& feeds, int batches);

}  // namespace meshflow::testutil

#endif  // MESHFLOW_TESTS_SUPPORT_GENERATORS_H_

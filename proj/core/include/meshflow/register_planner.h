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
#ifndef MESHFLOW_REGISTER_PLANNER_H_
#define MESHFLOW_REGISTER_PLANNER_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace meshflow {

// Pipeline stages with integer execution times and per-device register
// memory, plus per-device capacities.
struct StageGraph {
  std::vector<std::string> names;
  std::vector<int64_t> exec;                 // e_i >= 1
  std::vector<std::vector<int64_t>> memory;  // memory[i][k]: bytes of one register of stage i on device k
  std::vector<std::pair<int, int>> edges;    // stage -> downstream stage
  std::vector<int64_t> capacity;             // r_k

  int AddStage(std::string name, int64_t exec_time, std::vector<int64_t> mem);
  void AddEdge(int from, int to) { edges.emplace_back(from, to); }
  int size() const { return static_cast<int>(exec.size()); }
};

// l_i = e_i + the largest lifetime among downstream stages.
std::vector<int64_t> Lifetimes(const StageGraph& graph);

// c_i = ceil(l_i / ii).
std::vector<int64_t> RegisterCounts(const std::vector<int64_t>& lifetimes, int64_t ii);

// True when Σ_i c_i * m_ik <= r_k on every device k.
bool Feasible(const StageGraph& graph, int64_t ii);

struct PipelinePlan {
  int64_t ii = 1;
  std::vector<int64_t> counts;
  std::vector<int64_t> lifetimes;
};

// Smallest feasible initiation interval in [max e_i, Σ l_i]; throws a
// capacity error when even the upper bound does not fit.
PipelinePlan MinInitiationInterval(const StageGraph& graph);

// Whitespace separated lines: `capacity r1 r2 ...`, `stage name e m1 m2 ...`
// and `edge from to`; `#` starts a comment.
StageGraph ParseStageGraph(std::string_view text);
std::string FormatPipelinePlan(const StageGraph& graph, const PipelinePlan& plan);

}  // namespace meshflow

#endif  // MESHFLOW_REGISTER_PLANNER_H_

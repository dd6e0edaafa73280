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
#include "meshflow/register_planner.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "meshflow/error.h"

namespace meshflow {

int StageGraph::AddStage(std::string name, int64_t exec_time, std::vector<int64_t> mem) {
  names.push_back(std::move(name));
  exec.push_back(exec_time);
  memory.push_back(std::move(mem));
  return size() - 1;
}

namespace {

void CheckStageGraph(const StageGraph& g) {
  MF_CHECK(g.size() > 0, ErrorCode::kInvalidArgument, "stage graph is empty");
  for (int i = 0; i < g.size(); ++i) {
    MF_CHECK(g.exec[i] >= 1, ErrorCode::kInvalidArgument, "stage ", g.names[i], " needs e >= 1");
    MF_CHECK(g.memory[i].size() == g.capacity.size(), ErrorCode::kInvalidArgument, "stage ", g.names[i],
             " lists memory for ", g.memory[i].size(), " devices but there are ", g.capacity.size());
    for (int64_t m : g.memory[i]) {
      MF_CHECK(m >= 0, ErrorCode::kInvalidArgument, "negative memory on stage ", g.names[i]);
    }
  }
  for (int64_t r : g.capacity) { MF_CHECK(r >= 0, ErrorCode::kInvalidArgument, "negative capacity"); }
  for (const auto& [a, b] : g.edges) {
    MF_CHECK(a >= 0 && a < g.size() && b >= 0 && b < g.size(), ErrorCode::kInvalidArgument,
             "stage edge out of range");
  }
}

}  // namespace

std::vector<int64_t> Lifetimes(const StageGraph& graph) {
  CheckStageGraph(graph);
  const int n = graph.size();
  std::vector<std::vector<int>> down(n);
  std::vector<int> outdeg(n, 0);
  std::vector<std::vector<int>> up(n);
  for (const auto& [a, b] : graph.edges) {
    down[a].push_back(b);
    up[b].push_back(a);
    ++outdeg[a];
  }
  // Reverse topological order: process a stage once all downstream stages are done.
  std::vector<int64_t> life(n, 0);
  std::vector<int> ready;
  for (int i = 0; i < n; ++i) {
    if (outdeg[i] == 0) { ready.push_back(i); }
  }
  int done = 0;
  while (!ready.empty()) {
    const int i = ready.back();
    ready.pop_back();
    ++done;
    int64_t longest = 0;
    for (int k : down[i]) { longest = std::max(longest, life[k]); }
    life[i] = graph.exec[i] + longest;
    for (int p : up[i]) {
      if (--outdeg[p] == 0) { ready.push_back(p); }
    }
  }
  MF_CHECK(done == n, ErrorCode::kCycle, "stage graph contains a cycle");
  return life;
}

std::vector<int64_t> RegisterCounts(const std::vector<int64_t>& lifetimes, int64_t ii) {
  MF_CHECK(ii >= 1, ErrorCode::kInvalidArgument, "initiation interval must be >= 1");
  std::vector<int64_t> c;
  for (int64_t l : lifetimes) { c.push_back((l + ii - 1) / ii); }
  return c;
}

namespace {

bool FitsCapacity(const StageGraph& g, const std::vector<int64_t>& counts) {
  for (size_t k = 0; k < g.capacity.size(); ++k) {
    int64_t used = 0;
    for (int i = 0; i < g.size(); ++i) { used += counts[i] * g.memory[i][k]; }
    if (used > g.capacity[k]) { return false; }
  }
  return true;
}

}  // namespace

bool Feasible(const StageGraph& graph, int64_t ii) {
  return FitsCapacity(graph, RegisterCounts(Lifetimes(graph), ii));
}

PipelinePlan MinInitiationInterval(const StageGraph& graph) {
  const std::vector<int64_t> life = Lifetimes(graph);
  int64_t lo = *std::max_element(graph.exec.begin(), graph.exec.end());
  int64_t hi = std::max(lo, std::accumulate(life.begin(), life.end(), int64_t{0}));
  if (!FitsCapacity(graph, RegisterCounts(life, hi))) {
    Throw(ErrorCode::kCapacity, "registers do not fit device memory even with initiation interval ", hi);
  }
  while (lo < hi) {
    const int64_t mid = lo + (hi - lo) / 2;
    if (FitsCapacity(graph, RegisterCounts(life, mid))) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return PipelinePlan{lo, RegisterCounts(life, lo), life};
}

StageGraph ParseStageGraph(std::string_view text) {
  StageGraph g;
  std::map<std::string, int> index;
  std::vector<std::tuple<std::string, std::string, int, int, int>> pending_edges;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool has_capacity = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = line.substr(0, line.find('#'));
    std::vector<std::pair<std::string, int>> fields;
    for (size_t i = 0; i < line.size();) {
      if (std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
        continue;
      }
      const size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) { ++i; }
      fields.emplace_back(line.substr(start, i - start), static_cast<int>(start) + 1);
    }
    if (fields.empty()) { continue; }
    auto integer = [&](size_t f) {
      if (f >= fields.size()) {
        throw ParseError(line_no, static_cast<int>(line.size()) + 1, "missing field");
      }
      try {
        size_t used = 0;
        const long long v = std::stoll(fields[f].first, &used);
        if (used != fields[f].first.size()) { throw std::invalid_argument("trailing"); }
        return static_cast<int64_t>(v);
      } catch (const std::exception&) {
        throw ParseError(line_no, fields[f].second, "expected an integer, got '" + fields[f].first + "'");
      }
    };
    const std::string& kind = fields[0].first;
    if (kind == "capacity") {
      if (has_capacity) { throw ParseError(line_no, fields[0].second, "capacity given twice"); }
      if (!g.exec.empty()) { throw ParseError(line_no, fields[0].second, "capacity must precede stages"); }
      for (size_t f = 1; f < fields.size(); ++f) { g.capacity.push_back(integer(f)); }
      has_capacity = true;
    } else if (kind == "stage") {
      if (!has_capacity) { throw ParseError(line_no, fields[0].second, "stage before capacity line"); }
      if (fields.size() != 3 + g.capacity.size()) {
        throw ParseError(line_no, fields[0].second,
                         "stage needs a name, e and " + std::to_string(g.capacity.size()) + " memory fields");
      }
      const std::string& name = fields[1].first;
      if (index.count(name)) { throw ParseError(line_no, fields[1].second, "duplicate stage '" + name + "'"); }
      std::vector<int64_t> mem;
      for (size_t f = 3; f < fields.size(); ++f) { mem.push_back(integer(f)); }
      const int64_t e = integer(2);
      if (e < 1) { throw ParseError(line_no, fields[2].second, "execution time must be >= 1"); }
      index[name] = g.AddStage(name, e, std::move(mem));
    } else if (kind == "edge") {
      if (fields.size() != 3) { throw ParseError(line_no, fields[0].second, "edge needs two stage names"); }
      pending_edges.emplace_back(fields[1].first, fields[2].first, line_no, fields[1].second, fields[2].second);
    } else {
      throw ParseError(line_no, fields[0].second, "unknown record '" + kind + "'");
    }
  }
  for (const auto& [from, to, ln, c1, c2] : pending_edges) {
    if (!index.count(from)) { throw ParseError(ln, c1, "unknown stage '" + from + "'"); }
    if (!index.count(to)) { throw ParseError(ln, c2, "unknown stage '" + to + "'"); }
    g.AddEdge(index[from], index[to]);
  }
  return g;
}

std::string FormatPipelinePlan(const StageGraph& graph, const PipelinePlan& plan) {
  std::ostringstream os;
  os << "II\t" << plan.ii << "\n";
  os << "stage\tlifetime\tregisters\n";
  for (int i = 0; i < graph.size(); ++i) {
    os << graph.names[i] << "\t" << plan.lifetimes[i] << "\t" << plan.counts[i] << "\n";
  }
  return os.str();
}

}  // namespace meshflow

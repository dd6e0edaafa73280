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
#include "cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "meshflow/auto_parallel.h"
#include "meshflow/boxing.h"
#include "meshflow/compiler.h"
#include "meshflow/error.h"
#include "meshflow/graph_text.h"
#include "meshflow/register_planner.h"
#include "meshflow/runtime.h"

namespace meshflow {

namespace {

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  MF_CHECK(in.good(), ErrorCode::kInvalidArgument, "cannot open '", path, "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// `node:device=bytes`
MemoryCaps ParseCaps(const std::vector<std::string>& specs) {
  MemoryCaps caps;
  for (const std::string& s : specs) {
    int node = 0, device = 0;
    long long bytes = 0;
    char tail = 0;
    MF_CHECK(std::sscanf(s.c_str(), "%d:%d=%lld%c", &node, &device, &bytes, &tail) == 3, ErrorCode::kParse,
             "bad --cap '", s, "', expected node:device=bytes");
    caps[{node, device}] = bytes;
  }
  return caps;
}

LogicalGraph LoadValidated(const std::string& path) {
  LogicalGraph graph = ParseGraphText(ReadFile(path));
  Validate(graph);
  return graph;
}

struct CompileFlags {
  std::string spec;
  std::string registers = "default";
  std::vector<std::string> caps;
};

PhysicalPlan BuildPlan(const CompileFlags& flags) {
  CompileOptions options;
  options.registers = flags.registers == "planner" ? RegisterPolicy::kPlanner : RegisterPolicy::kDefault;
  const MemoryCaps caps = ParseCaps(flags.caps);
  options.planner_caps = caps;
  PhysicalPlan plan = Compile(LoadValidated(flags.spec), options);
  if (!caps.empty()) { InsertControlEdges(plan, caps); }
  return plan;
}

void AddCompileFlags(CLI::App* cmd, CompileFlags* flags) {
  cmd->add_option("spec", flags->spec, "Graph file")->required();
  cmd->add_option("--registers", flags->registers, "Register slot policy")
      ->check(CLI::IsMember({"default", "planner"}));
  cmd->add_option("--cap", flags->caps, "Device memory cap node:device=bytes; adds control edges");
}

int CmdCompile(const CompileFlags& flags, bool dump, std::ostream& out) {
  PhysicalPlan plan = BuildPlan(flags);
  const std::vector<std::string> violations = ValidatePlan(plan);
  MF_CHECK(violations.empty(), ErrorCode::kCompile, "invalid plan: ", violations.front());
  if (dump) {
    out << DumpPlan(plan);
    return kExitOk;
  }
  out << "actors\t" << plan.actors.size() << "\n";
  for (ActorKind k : {ActorKind::kSource, ActorKind::kCompute, ActorKind::kBoxing, ActorKind::kNetworking,
                      ActorKind::kSink}) {
    out << ActorKindName(k) << "\t" << plan.CountActors(k) << "\n";
  }
  out << "registers\t" << plan.registers.size() << "\n";
  out << "queues\t" << plan.queues.size() << "\n";
  return kExitOk;
}

struct RunFlags {
  CompileFlags compile;
  int batches = 1;
  std::string mode = "det";
  std::string trace;
  uint64_t seed = 0;
  int latency = 1;
  bool eager = false;
};

int CmdRun(const RunFlags& flags, std::ostream& out) {
  MF_CHECK(flags.trace.empty() || flags.mode == "det", ErrorCode::kInvalidArgument,
           "--trace is only recorded in det mode");
  PhysicalPlan plan = BuildPlan(flags.compile);
  const FeedSet feeds = MakeFeeds(plan.graph, flags.batches, flags.seed);
  RunOptions options;
  options.batches = flags.batches;
  options.mode = flags.mode == "threaded" ? RunMode::kThreaded : RunMode::kDeterministic;
  options.network_latency = flags.latency;
  options.memory_caps = ParseCaps(flags.compile.caps);
  options.allocation = flags.eager ? AllocationMode::kEager : AllocationMode::kCounters;
  options.check_invariants = true;
  const RunResult result = Run(plan, feeds, options);
  MF_CHECK(result.violations.empty(), ErrorCode::kProtocol, "protocol violation: ", result.violations.front());
  if (!flags.trace.empty()) {
    std::ofstream f(flags.trace);
    MF_CHECK(f.good(), ErrorCode::kInvalidArgument, "cannot write '", flags.trace, "'");
    f << FormatTrace(result.trace);
  }

  double worst = 0;
  for (int b = 0; b < flags.batches; ++b) {
    TensorMap batch_feeds;
    for (const auto& [id, per_batch] : feeds) { batch_feeds[id] = per_batch[b]; }
    const TensorMap expected = EvalLogical(plan.graph, batch_feeds);
    for (const auto& [sink, outputs] : result.outputs) {
      out << sink << "[" << b << "] = " << outputs[b].DebugString() << "\n";
      worst = std::max(worst, MaxAbsDiff(outputs[b], expected.at(sink)));
    }
  }
  if (options.mode == RunMode::kDeterministic) { out << "ticks\t" << result.ticks << "\n"; }
  out << "bytes_moved\t" << result.bytes_moved << "\n";
  const bool match = worst <= 1e-9;
  out << "oracle\t" << (match ? "match" : "MISMATCH") << "\tmax_abs_diff=" << Num(worst) << "\n";
  return match ? kExitOk : kExitRuntime;
}

struct AutoFlags {
  std::string spec;
  int alpha = kDefaultMergeThreshold;
  bool brute_force = false;
  std::optional<uint64_t> seed;
  double device_speed = 1;
  double bandwidth = 1;
};

int CmdAutoParallel(const AutoFlags& flags, std::ostream& out) {
  const LogicalGraph graph = LoadValidated(flags.spec);
  StrategyOptions options;
  options.alpha = flags.alpha;
  options.seed = flags.seed;
  options.model.device_speed = flags.device_speed;
  options.model.bandwidth = flags.bandwidth;
  const StrategyProblem problem = BuildCostGraph(graph, options.model);
  const Strategy strategy = SearchStrategy(problem, options);
  out << "op\tsignature\n";
  for (const std::string& id : problem.op_ids) { out << id << "\t" << strategy.signatures.at(id).ToString() << "\n"; }
  out << "cost\t" << Num(strategy.cost) << "\n";
  out << "reduced_nodes\t" << strategy.reduced_nodes << "\n";
  if (flags.brute_force) {
    const BruteForceResult best = BruteForce(problem.graph);
    out << "brute_force\t" << Num(best.cost) << "\n";
    out << "optimal\t" << (strategy.cost <= best.cost + 1e-9 ? "yes" : "no") << "\n";
  }
  return kExitOk;
}

int CmdCost(int p1, int p2, int64_t bytes, std::ostream& out) {
  MF_CHECK(p1 >= 1 && p2 >= 1 && bytes >= 0, ErrorCode::kInvalidArgument, "need p1, p2 >= 1 and bytes >= 0");
  const SbpComponent s0 = SbpComponent::Split(0), s1 = SbpComponent::Split(1);
  const SbpComponent b = SbpComponent::Broadcast(), p = SbpComponent::Partial();
  const std::vector<std::pair<SbpComponent, SbpComponent>> rows = {
      {s0, s0}, {s0, s1}, {s0, b}, {s0, p}, {b, s0}, {b, b}, {b, p}, {p, s0}, {p, b}, {p, p}};
  const char* names[] = {"S(i)->S(i)", "S(i)->S(j)", "S->B", "S->P", "B->S", "B->B", "B->P", "P->S", "P->B", "P->P"};
  const TransferRegime same = TransferRegime::Same(p1);
  const TransferRegime disjoint = TransferRegime::Disjoint(p1, p2);
  out << "transfer\tsame\tdisjoint\tsame_primitive\tdisjoint_primitive\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& [src, dst] = rows[i];
    out << names[i] << "\t" << TransferCost(src, dst, bytes, same) << "\t" << TransferCost(src, dst, bytes, disjoint)
        << "\t" << BoxingPrimitiveName(ChoosePrimitive(src, dst, same)) << "\t"
        << BoxingPrimitiveName(ChoosePrimitive(src, dst, disjoint)) << "\n";
  }
  return kExitOk;
}

int CmdPlanRegisters(const std::string& path, std::ostream& out) {
  const StageGraph graph = ParseStageGraph(ReadFile(path));
  out << FormatPipelinePlan(graph, MinInitiationInterval(graph));
  return kExitOk;
}

// Per-actor activity summary, optionally with a tick-by-tick chart where
// `#` marks busy ticks and `.` idle ones.
int CmdTraceView(const std::string& path, bool timeline, std::ostream& out) {
  const std::vector<TraceEvent> trace = ParseTrace(ReadFile(path));
  struct Row {
    int fires = 0;
    int64_t first = -1;
    int64_t last = -1;
    int64_t busy = 0;
    int64_t open = -1;
    std::vector<std::pair<int64_t, int64_t>> spans;
  };
  std::map<ActorId, Row> rows;
  int64_t end = 0;
  for (const TraceEvent& e : trace) {
    Row& r = rows[e.actor];
    end = std::max(end, e.tick);
    if (e.event == "fire") {
      ++r.fires;
      if (r.first < 0) { r.first = e.tick; }
      r.open = e.tick;
    } else if (e.event == "done") {
      MF_CHECK(r.open >= 0, ErrorCode::kParse, "done without fire for ", ActorIdHex(e.actor));
      r.busy += e.tick - r.open;
      r.spans.emplace_back(r.open, e.tick);
      r.last = e.tick;
      r.open = -1;
    } else {
      Throw(ErrorCode::kParse, "unknown trace event '", e.event, "'");
    }
  }
  out << "actor\tnode\tthread\tseq\tactions\tfirst_fire\tlast_done\tbusy_ticks\n";
  for (const auto& [id, r] : rows) {
    const ActorAddress a = ParseActorId(id);
    out << ActorIdHex(id) << "\t" << a.node << "\t" << a.thread << "\t" << a.seq << "\t" << r.fires << "\t" << r.first
        << "\t" << r.last << "\t" << r.busy << "\n";
  }
  out << "ticks\t" << end << "\n";
  if (timeline) {
    for (const auto& [id, r] : rows) {
      std::string line(static_cast<size_t>(end), '.');
      for (const auto& [from, to] : r.spans) {
        for (int64_t t = from; t < to; ++t) { line[t] = '#'; }
      }
      out << ActorIdHex(id) << " " << line << "\n";
    }
  }
  return kExitOk;
}

int ExitFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return kExitParse;
    case ErrorCode::kCapacity: return kExitCapacity;
    case ErrorCode::kRuntime:
    case ErrorCode::kProtocol:
    case ErrorCode::kDeadlock:
    case ErrorCode::kOutOfMemory:
    case ErrorCode::kRouting: return kExitRuntime;
    default: return kExitCompile;
  }
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"meshflow: SBP compiler and actor runtime simulator", "meshflow"};
  app.require_subcommand(1);

  CompileFlags compile_flags;
  bool dump_plan = false;
  CLI::App* compile = app.add_subcommand("compile", "Lower a graph to a physical plan");
  AddCompileFlags(compile, &compile_flags);
  compile->add_flag("--dump-plan", dump_plan, "Print the full plan");

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Compile and execute a graph on random feeds");
  AddCompileFlags(run, &run_flags.compile);
  run->add_option("--batches", run_flags.batches, "Batches per source")->check(CLI::NonNegativeNumber);
  run->add_option("--mode", run_flags.mode, "Scheduler")->check(CLI::IsMember({"det", "threaded"}));
  run->add_option("--trace", run_flags.trace, "Write the event trace to this file");
  run->add_option("--seed", run_flags.seed, "Feed seed");
  run->add_option("--latency", run_flags.latency, "Cross-node latency in ticks")->check(CLI::NonNegativeNumber);
  run->add_flag("--eager", run_flags.eager, "Allocate outputs on demand instead of using register credit");

  AutoFlags auto_flags;
  uint64_t auto_seed = 0;
  CLI::App* autopar = app.add_subcommand("autoparallel", "Search SBP signatures for every op");
  autopar->add_option("spec", auto_flags.spec, "Graph file")->required();
  autopar->add_option("--alpha", auto_flags.alpha, "Merge threshold on candidate products")
      ->check(CLI::PositiveNumber);
  autopar->add_flag("--brute-force", auto_flags.brute_force, "Compare with exhaustive search");
  CLI::Option* seed_opt = autopar->add_option("--seed", auto_seed, "Random greedy start");
  autopar->add_option("--device-speed", auto_flags.device_speed, "FLOPs per time unit")->check(CLI::PositiveNumber);
  autopar->add_option("--bandwidth", auto_flags.bandwidth, "Bytes per time unit")->check(CLI::PositiveNumber);

  int p1 = 1, p2 = 1;
  int64_t bytes = 0;
  CLI::App* cost = app.add_subcommand("cost", "Print the transfer cost table");
  cost->add_option("--p1", p1, "Producer device count")->required();
  cost->add_option("--p2", p2, "Consumer device count")->required();
  cost->add_option("--bytes", bytes, "Tensor size in bytes")->required();

  std::string stages_path;
  CLI::App* plan_regs = app.add_subcommand("plan-registers", "Minimum initiation interval and register counts");
  plan_regs->add_option("stages", stages_path, "Stage file")->required();

  std::string trace_path;
  bool timeline = false;
  CLI::App* trace_view = app.add_subcommand("trace-view", "Summarize a run trace");
  trace_view->add_option("trace", trace_path, "Trace file")->required();
  trace_view->add_flag("--timeline", timeline, "Draw per-actor busy ticks");

  std::vector<const char*> argv;
  for (const std::string& a : args) { argv.push_back(a.c_str()); }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitParse;
  }

  try {
    if (*compile) { return CmdCompile(compile_flags, dump_plan, out); }
    if (*run) { return CmdRun(run_flags, out); }
    if (*autopar) {
      if (*seed_opt) { auto_flags.seed = auto_seed; }
      return CmdAutoParallel(auto_flags, out);
    }
    if (*cost) { return CmdCost(p1, p2, bytes, out); }
    if (*plan_regs) { return CmdPlanRegisters(stages_path, out); }
    if (*trace_view) { return CmdTraceView(trace_path, timeline, out); }
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    return ExitFor(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitParse;
}

}  // namespace meshflow

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
#include "meshflow/graph.h"

#include <functional>
#include <queue>
#include <set>

#include "meshflow/error.h"

namespace meshflow {

const LogicalOp* LogicalGraph::Find(const std::string& id) const {
  for (const LogicalOp& op : ops_) {
    if (op.id == id) { return &op; }
  }
  return nullptr;
}

LogicalOp* LogicalGraph::FindMutable(const std::string& id) {
  for (LogicalOp& op : ops_) {
    if (op.id == id) { return &op; }
  }
  return nullptr;
}

const LogicalOp& LogicalGraph::op(const std::string& id) const {
  const LogicalOp* op = Find(id);
  MF_CHECK(op != nullptr, ErrorCode::kInvalidArgument, "unknown op '", id, "'");
  return *op;
}

std::vector<std::string> LogicalGraph::Inputs(const std::string& id) const {
  std::vector<std::string> inputs(Arity(op(id).kind.type));
  for (const Edge& e : edges_) {
    if (e.consumer == id && e.slot >= 0 && e.slot < static_cast<int>(inputs.size())) {
      inputs[e.slot] = e.producer;
    }
  }
  return inputs;
}

std::vector<Edge> LogicalGraph::OutEdges(const std::string& id) const {
  std::vector<Edge> out;
  for (const Edge& e : edges_) {
    if (e.producer == id) { out.push_back(e); }
  }
  return out;
}

const Transform* LogicalGraph::FindTransform(const std::string& consumer, int slot) const {
  for (const Transform& t : transforms_) {
    if (t.consumer == consumer && t.slot == slot) { return &t; }
  }
  return nullptr;
}

std::vector<std::string> LogicalGraph::Sinks() const {
  std::set<std::string> producers;
  for (const Edge& e : edges_) { producers.insert(e.producer); }
  std::vector<std::string> sinks;
  for (const LogicalOp& op : ops_) {
    if (!producers.count(op.id)) { sinks.push_back(op.id); }
  }
  return sinks;
}

namespace {

void ValidateStructure(const LogicalGraph& graph) {
  std::set<std::string> ids;
  for (const LogicalOp& op : graph.ops()) {
    MF_CHECK(!op.id.empty(), ErrorCode::kInvalidArgument, "op with empty id");
    MF_CHECK(ids.insert(op.id).second, ErrorCode::kInvalidArgument, "duplicate op id '", op.id, "'");
    MF_CHECK(op.in_sbp.empty() || static_cast<int>(op.in_sbp.size()) == Arity(op.kind.type),
             ErrorCode::kInvalidArgument, "op '", op.id, "' lists ", op.in_sbp.size(),
             " input signatures for arity ", Arity(op.kind.type));
    MF_CHECK(op.ticks >= 1, ErrorCode::kInvalidArgument, "op '", op.id, "' needs ticks >= 1");
    MF_CHECK(op.workspace >= 0, ErrorCode::kInvalidArgument, "op '", op.id, "' has negative workspace");
    if (op.kind.type == OpType::kSource && op.value) {
      MF_CHECK(op.value->shape() == op.shape, ErrorCode::kShape, "source '", op.id,
               "' value does not match its shape ", ShapeToString(op.shape));
    }
  }
  std::set<std::pair<std::string, int>> filled;
  for (const Edge& e : graph.edges()) {
    MF_CHECK(ids.count(e.producer), ErrorCode::kInvalidArgument, "dangling edge: unknown producer '",
             e.producer, "'");
    MF_CHECK(ids.count(e.consumer), ErrorCode::kInvalidArgument, "dangling edge: unknown consumer '",
             e.consumer, "'");
    MF_CHECK(e.producer != e.consumer, ErrorCode::kCycle, "self-loop on op '", e.producer, "'");
    const int arity = Arity(graph.op(e.consumer).kind.type);
    MF_CHECK(e.slot >= 0 && e.slot < arity, ErrorCode::kInvalidArgument, "edge into '", e.consumer,
             "' slot ", e.slot, " but the op takes ", arity, " inputs");
    MF_CHECK(filled.insert({e.consumer, e.slot}).second, ErrorCode::kInvalidArgument, "input ",
             e.slot, " of '", e.consumer, "' has more than one producer");
  }
  for (const LogicalOp& op : graph.ops()) {
    for (int s = 0; s < Arity(op.kind.type); ++s) {
      MF_CHECK(filled.count({op.id, s}), ErrorCode::kInvalidArgument, "dangling input ", s, " of '",
               op.id, "'");
    }
  }
  std::set<std::pair<std::string, int>> transformed;
  for (const Transform& t : graph.transforms()) {
    bool found = false;
    for (const Edge& e : graph.edges()) {
      found = found || (e.producer == t.producer && e.consumer == t.consumer && e.slot == t.slot);
    }
    MF_CHECK(found, ErrorCode::kInvalidArgument, "transform ", t.producer, " -> ", t.consumer, ":", t.slot,
             " does not sit on an edge");
    MF_CHECK(transformed.insert({t.consumer, t.slot}).second, ErrorCode::kInvalidArgument,
             "two transforms on input ", t.slot, " of '", t.consumer, "'");
    MF_CHECK(t.sbp.depth() == t.placement.hierarchy_depth(), ErrorCode::kInvalidArgument,
             "transform SBP ", t.sbp.ToString(), " does not match its placement depth");
  }
}

}  // namespace

std::vector<std::string> TopoSort(const LogicalGraph& graph) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> consumers;
  for (const LogicalOp& op : graph.ops()) { indegree[op.id] = 0; }
  for (const Edge& e : graph.edges()) {
    MF_CHECK(e.producer != e.consumer, ErrorCode::kCycle, "self-loop on op '", e.producer, "'");
    ++indegree[e.consumer];
    consumers[e.producer].push_back(e.consumer);
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) { ready.push(id); }
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const std::string& c : consumers[id]) {
      if (--indegree[c] == 0) { ready.push(c); }
    }
  }
  MF_CHECK(order.size() == indegree.size(), ErrorCode::kCycle, "graph contains a cycle");
  return order;
}

std::map<std::string, Shape> InferShapes(const LogicalGraph& graph,
                                         const std::map<std::string, Shape>& feed_shapes) {
  std::map<std::string, Shape> shapes;
  for (const std::string& id : TopoSort(graph)) {
    const LogicalOp& op = graph.op(id);
    if (op.kind.type == OpType::kSource) {
      auto it = feed_shapes.find(id);
      shapes[id] = it != feed_shapes.end() ? it->second : op.shape;
      continue;
    }
    std::vector<Shape> in;
    for (const std::string& p : graph.Inputs(id)) {
      MF_CHECK(!p.empty(), ErrorCode::kInvalidArgument, "dangling input of '", id, "'");
      in.push_back(shapes.at(p));
    }
    try {
      shapes[id] = InferKernelShape(op.kind, in);
    } catch (const Error& e) {
      Throw(ErrorCode::kShape, "op '", id, "': ", e.what());
    }
  }
  return shapes;
}

void Validate(const LogicalGraph& graph) {
  ValidateStructure(graph);
  TopoSort(graph);
  InferShapes(graph);
}

TensorMap EvalLogical(const LogicalGraph& graph, const TensorMap& feeds) {
  TensorMap values;
  for (const std::string& id : TopoSort(graph)) {
    const LogicalOp& op = graph.op(id);
    if (op.kind.type == OpType::kSource) {
      auto it = feeds.find(id);
      if (it != feeds.end()) {
        values[id] = it->second;
      } else {
        MF_CHECK(op.value.has_value(), ErrorCode::kInvalidArgument, "missing feed for source '", id, "'");
        values[id] = *op.value;
      }
      continue;
    }
    std::vector<Tensor> in;
    for (const std::string& p : graph.Inputs(id)) {
      MF_CHECK(values.count(p), ErrorCode::kInvalidArgument, "dangling input of '", id, "'");
      in.push_back(values.at(p));
    }
    try {
      values[id] = ApplyKernel(op.kind, in);
    } catch (const Error& e) {
      Throw(ErrorCode::kShape, "op '", id, "': ", e.what());
    }
  }
  return values;
}

}  // namespace meshflow

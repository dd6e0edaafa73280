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
#ifndef MESHFLOW_GRAPH_H_
#define MESHFLOW_GRAPH_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meshflow/placement.h"
#include "meshflow/sbp.h"
#include "meshflow/tensor.h"

namespace meshflow {

// Every op produces exactly one tensor, so a tensor is named by its
// producer's op id.
struct LogicalOp {
  std::string id;
  OpKind kind;
  Placement placement;
  std::optional<NdSbp> sbp;                  // output annotation
  std::vector<std::optional<NdSbp>> in_sbp;  // empty, or one entry per input slot

  // Source only: logical shape and an optional constant value.
  Shape shape;
  std::optional<Tensor> value;

  // Execution hints consumed by the compiler and runtime.
  int ticks = 1;
  int64_t workspace = 0;

  bool operator==(const LogicalOp&) const = default;
};

struct Edge {
  std::string producer;
  std::string consumer;
  int slot = 0;

  bool operator==(const Edge&) const = default;
};

// Explicit global transform of a producer's tensor before it reaches a
// consumer input: the tensor is re-laid out to (placement, sbp).
struct Transform {
  std::string producer;
  std::string consumer;
  int slot = 0;
  Placement placement;
  NdSbp sbp;

  bool operator==(const Transform&) const = default;
};

class LogicalGraph {
 public:
  void AddOp(LogicalOp op) { ops_.push_back(std::move(op)); }
  void AddEdge(const std::string& producer, const std::string& consumer, int slot) {
    edges_.push_back({producer, consumer, slot});
  }
  void AddTransform(Transform t) { transforms_.push_back(std::move(t)); }

  const std::vector<LogicalOp>& ops() const { return ops_; }
  std::vector<LogicalOp>& mutable_ops() { return ops_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Transform>& transforms() const { return transforms_; }

  const LogicalOp* Find(const std::string& id) const;
  LogicalOp* FindMutable(const std::string& id);
  const LogicalOp& op(const std::string& id) const;

  // Producers indexed by input slot; missing slots are empty strings.
  std::vector<std::string> Inputs(const std::string& id) const;
  // Edges leaving `id`, in insertion order.
  std::vector<Edge> OutEdges(const std::string& id) const;
  const Transform* FindTransform(const std::string& consumer, int slot) const;
  // Ops whose output nobody consumes, in op order.
  std::vector<std::string> Sinks() const;

  bool operator==(const LogicalGraph&) const = default;

 private:
  std::vector<LogicalOp> ops_;
  std::vector<Edge> edges_;
  std::vector<Transform> transforms_;
};

// Structural checks (unique ids, arity, acyclicity, transforms on real
// edges) followed by whole-graph shape inference.
void Validate(const LogicalGraph& graph);

// Kahn order; ties broken by lexicographic op id.
std::vector<std::string> TopoSort(const LogicalGraph& graph);

// Logical (global) shape of every op's output. `feed_shapes` overrides
// the declared shape of source ops.
std::map<std::string, Shape> InferShapes(const LogicalGraph& graph,
                                         const std::map<std::string, Shape>& feed_shapes = {});

using TensorMap = std::map<std::string, Tensor>;

// Single-device reference interpreter: evaluates every op in topological
// order and returns all op outputs. Feeds override source constants.
TensorMap EvalLogical(const LogicalGraph& graph, const TensorMap& feeds);

}  // namespace meshflow

#endif  // MESHFLOW_GRAPH_H_

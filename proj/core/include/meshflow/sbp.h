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
#ifndef MESHFLOW_SBP_H_
#define MESHFLOW_SBP_H_

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshflow/placement.h"
#include "meshflow/tensor.h"

namespace meshflow {

enum class SbpType { kSplit, kBroadcast, kPartial };
enum class ReduceKind { kSum, kMax };

// One level of the split / broadcast / partial-value annotation.
struct SbpComponent {
  SbpType type = SbpType::kBroadcast;
  int64_t axis = 0;                   // kSplit only
  ReduceKind reduce = ReduceKind::kSum;  // kPartial only

  static SbpComponent Split(int64_t axis) { return {SbpType::kSplit, axis, ReduceKind::kSum}; }
  static SbpComponent Broadcast() { return {SbpType::kBroadcast, 0, ReduceKind::kSum}; }
  static SbpComponent Partial(ReduceKind kind = ReduceKind::kSum) {
    return {SbpType::kPartial, 0, kind};
  }

  bool is_split() const { return type == SbpType::kSplit; }
  bool is_broadcast() const { return type == SbpType::kBroadcast; }
  bool is_partial() const { return type == SbpType::kPartial; }

  // Ignores the fields that do not apply to the component's type.
  bool operator==(const SbpComponent& other) const;
  std::strong_ordering operator<=>(const SbpComponent& other) const;

  std::string ToString() const;  // S(k) | B | P(sum) | P(max)
};

// One component per hierarchy level of the placement.
struct NdSbp {
  std::vector<SbpComponent> components;

  NdSbp() = default;
  NdSbp(std::initializer_list<SbpComponent> comps) : components(comps) {}
  explicit NdSbp(std::vector<SbpComponent> comps) : components(std::move(comps)) {}

  int depth() const { return static_cast<int>(components.size()); }
  const SbpComponent& operator[](int level) const { return components.at(level); }

  bool operator==(const NdSbp&) const = default;
  auto operator<=>(const NdSbp&) const = default;

  // `S(0)` for depth 1, `(S(0),B)` for depth 2.
  std::string ToString() const;
};

NdSbp Uniform(const SbpComponent& comp, int depth);

SbpComponent ParseSbpComponent(const std::string& text);
NdSbp ParseNdSbp(const std::string& text);

// Per-input and output signatures of one op.
struct OpSbpSignature {
  std::vector<NdSbp> inputs;
  NdSbp output;

  bool operator==(const OpSbpSignature&) const = default;
  auto operator<=>(const OpSbpSignature&) const = default;
  std::string ToString() const;  // `S(0),B -> S(0)`
};

// Balanced split: the first (extent % parts) shards are one larger.
std::vector<int64_t> ShardExtents(int64_t extent, int parts);
std::vector<Tensor> SplitShard(const Tensor& global, int64_t axis, int parts);

double ReductionIdentity(ReduceKind kind);
Tensor ReduceElementwise(ReduceKind kind, std::span<const Tensor> parts);

// Local tensors in placement order. Partial values use the canonical
// decomposition: the first device of each level holds the value and the rest
// hold the reduction identity.
std::vector<Tensor> Materialize(const Tensor& global, const NdSbp& sbp, const Placement& placement);
Tensor Reconstruct(std::span<const Tensor> locals, const NdSbp& sbp, const Placement& placement);

// Local shapes implied by materializing a tensor of `global` shape.
std::vector<Shape> LocalShapes(const Shape& global, const NdSbp& sbp, const Placement& placement);
// True when every split in `sbp` is within rank and leaves no shard empty.
bool IsValidFor(const NdSbp& sbp, const Shape& global, const Placement& placement);

std::optional<SbpComponent> InferMatMulSbp(const SbpComponent& x, const SbpComponent& w);
std::optional<NdSbp> InferMatMulSbp2d(const NdSbp& x, const NdSbp& w);

// Rule table lookup: all valid signatures with the given input annotations.
// An empty result means the inputs need boxing first.
std::vector<OpSbpSignature> InferOpSbp(const OpKind& kind, std::span<const NdSbp> inputs);

// Every signature the rule table admits for an op whose inputs have the given
// global shapes on `placement`, over split axes, broadcast and partial-sum.
// Sources (no inputs) enumerate split and broadcast outputs of `source_shape`.
std::vector<OpSbpSignature> EnumerateSignatures(const OpKind& kind, std::span<const Shape> input_shapes,
                                                const Shape& source_shape, const Placement& placement);

}  // namespace meshflow

#endif  // MESHFLOW_SBP_H_

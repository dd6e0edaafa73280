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
#include "meshflow/sbp.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "meshflow/error.h"

namespace meshflow {

bool SbpComponent::operator==(const SbpComponent& other) const {
  if (type != other.type) { return false; }
  if (type == SbpType::kSplit) { return axis == other.axis; }
  if (type == SbpType::kPartial) { return reduce == other.reduce; }
  return true;
}

std::strong_ordering SbpComponent::operator<=>(const SbpComponent& other) const {
  if (auto c = type <=> other.type; c != 0) { return c; }
  if (type == SbpType::kSplit) { return axis <=> other.axis; }
  if (type == SbpType::kPartial) { return reduce <=> other.reduce; }
  return std::strong_ordering::equal;
}

std::string SbpComponent::ToString() const {
  switch (type) {
    case SbpType::kSplit: return "S(" + std::to_string(axis) + ")";
    case SbpType::kBroadcast: return "B";
    case SbpType::kPartial: return reduce == ReduceKind::kSum ? "P(sum)" : "P(max)";
  }
  return "?";
}

std::string NdSbp::ToString() const {
  if (components.size() == 1) { return components[0].ToString(); }
  std::string s = "(";
  for (size_t i = 0; i < components.size(); ++i) { s += (i ? "," : "") + components[i].ToString(); }
  return s + ")";
}

NdSbp Uniform(const SbpComponent& comp, int depth) {
  return NdSbp(std::vector<SbpComponent>(depth, comp));
}

std::string OpSbpSignature::ToString() const {
  std::string s;
  for (size_t i = 0; i < inputs.size(); ++i) { s += (i ? "," : "") + inputs[i].ToString(); }
  return s + (inputs.empty() ? "-> " : " -> ") + output.ToString();
}

namespace {

std::string StripSpaces(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) { out += c; }
  }
  return out;
}

}  // namespace

SbpComponent ParseSbpComponent(const std::string& raw) {
  const std::string text = StripSpaces(raw);
  if (text == "B") { return SbpComponent::Broadcast(); }
  if (text == "P" || text == "P(sum)") { return SbpComponent::Partial(ReduceKind::kSum); }
  if (text == "P(max)") { return SbpComponent::Partial(ReduceKind::kMax); }
  if (text.size() >= 4 && text[0] == 'S' && text[1] == '(' && text.back() == ')') {
    const std::string digits = text.substr(2, text.size() - 3);
    if (!digits.empty() && digits.size() <= 3 &&
        std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      return SbpComponent::Split(std::stoll(digits));
    }
  }
  Throw(ErrorCode::kParse, "malformed SBP component '", raw, "'");
}

NdSbp ParseNdSbp(const std::string& raw) {
  const std::string text = StripSpaces(raw);
  if (text.size() >= 2 && text.front() == '(' && text.back() == ')') {
    const std::string body = text.substr(1, text.size() - 2);
    std::vector<SbpComponent> comps;
    int depth = 0;
    size_t start = 0;
    for (size_t i = 0; i <= body.size(); ++i) {
      if (i == body.size() || (body[i] == ',' && depth == 0)) {
        comps.push_back(ParseSbpComponent(body.substr(start, i - start)));
        start = i + 1;
      } else if (body[i] == '(') {
        ++depth;
      } else if (body[i] == ')') {
        --depth;
      }
    }
    MF_CHECK(comps.size() <= 2, ErrorCode::kParse, "SBP '", raw, "' has more than two levels");
    return NdSbp(std::move(comps));
  }
  return NdSbp{ParseSbpComponent(text)};
}

std::vector<int64_t> ShardExtents(int64_t extent, int parts) {
  MF_CHECK(parts >= 1, ErrorCode::kInvalidArgument, "cannot split into ", parts, " parts");
  MF_CHECK(parts <= extent, ErrorCode::kShape, "cannot split extent ", extent, " into ", parts,
           " non-empty shards");
  std::vector<int64_t> out(parts, extent / parts);
  for (int64_t i = 0; i < extent % parts; ++i) { ++out[i]; }
  return out;
}

std::vector<Tensor> SplitShard(const Tensor& global, int64_t axis, int parts) {
  MF_CHECK(axis >= 0 && axis < global.rank(), ErrorCode::kShape, "split axis ", axis,
           " out of range for ", ShapeToString(global.shape()));
  std::vector<Tensor> out;
  int64_t offset = 0;
  for (int64_t len : ShardExtents(global.extent(axis), parts)) {
    out.push_back(Slice(global, axis, offset, len));
    offset += len;
  }
  return out;
}

double ReductionIdentity(ReduceKind kind) {
  return kind == ReduceKind::kSum ? 0.0 : -std::numeric_limits<double>::infinity();
}

Tensor ReduceElementwise(ReduceKind kind, std::span<const Tensor> parts) {
  MF_CHECK(!parts.empty(), ErrorCode::kInvalidArgument, "reduction over zero tensors");
  Tensor acc = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) {
    acc = kind == ReduceKind::kSum ? Add(acc, parts[i]) : ElementwiseMax(acc, parts[i]);
  }
  return acc;
}

namespace {

constexpr double kBroadcastTolerance = 1e-12;

std::vector<Tensor> MaterializeLevel(const Tensor& value, const SbpComponent& comp, int parts) {
  switch (comp.type) {
    case SbpType::kSplit: return SplitShard(value, comp.axis, parts);
    case SbpType::kBroadcast: return std::vector<Tensor>(parts, value);
    case SbpType::kPartial: {
      std::vector<Tensor> out(parts, Tensor::Filled(value.shape(), ReductionIdentity(comp.reduce)));
      out[0] = value;
      return out;
    }
  }
  return {};
}

Tensor ReconstructLevel(std::span<const Tensor> locals, const SbpComponent& comp) {
  MF_CHECK(!locals.empty(), ErrorCode::kShape, "no local tensors to reconstruct from");
  switch (comp.type) {
    case SbpType::kSplit:
      MF_CHECK(comp.axis < locals[0].rank(), ErrorCode::kShape, "split axis ", comp.axis,
               " out of range for local ", ShapeToString(locals[0].shape()));
      return Concat(locals, comp.axis);
    case SbpType::kBroadcast:
      for (size_t i = 1; i < locals.size(); ++i) {
        MF_CHECK(locals[i].shape() == locals[0].shape(), ErrorCode::kShape,
                 "broadcast copies have different shapes");
        const double diff = MaxAbsDiff(locals[i], locals[0]);
        MF_CHECK(diff <= kBroadcastTolerance, ErrorCode::kConsistency, "broadcast copy ", i,
                 " differs from copy 0 by ", diff);
      }
      return locals[0];
    case SbpType::kPartial: return ReduceElementwise(comp.reduce, locals);
  }
  return locals[0];
}

std::vector<Shape> ShapeLevel(const Shape& shape, const SbpComponent& comp, int parts) {
  if (!comp.is_split()) { return std::vector<Shape>(parts, shape); }
  MF_CHECK(comp.axis >= 0 && comp.axis < static_cast<int64_t>(shape.size()), ErrorCode::kShape,
           "split axis ", comp.axis, " out of range for ", ShapeToString(shape));
  std::vector<Shape> out;
  for (int64_t len : ShardExtents(shape[comp.axis], parts)) {
    Shape s = shape;
    s[comp.axis] = len;
    out.push_back(std::move(s));
  }
  return out;
}

void CheckDepth(const NdSbp& sbp, const Placement& placement) {
  MF_CHECK(sbp.depth() == placement.hierarchy_depth(), ErrorCode::kInvalidArgument, "SBP ",
           sbp.ToString(), " has depth ", sbp.depth(), " but placement ", placement.ToString(),
           " has hierarchy depth ", placement.hierarchy_depth());
}

}  // namespace

std::vector<Tensor> Materialize(const Tensor& global, const NdSbp& sbp, const Placement& placement) {
  CheckDepth(sbp, placement);
  if (sbp.depth() == 1) { return MaterializeLevel(global, sbp[0], placement.size()); }
  const int rows = placement.level_extent(0);
  const int cols = placement.level_extent(1);
  std::vector<Tensor> out;
  out.reserve(rows * cols);
  for (const Tensor& row_value : MaterializeLevel(global, sbp[0], rows)) {
    for (Tensor& t : MaterializeLevel(row_value, sbp[1], cols)) { out.push_back(std::move(t)); }
  }
  return out;
}

Tensor Reconstruct(std::span<const Tensor> locals, const NdSbp& sbp, const Placement& placement) {
  CheckDepth(sbp, placement);
  MF_CHECK(static_cast<int>(locals.size()) == placement.size(), ErrorCode::kShape, "got ",
           locals.size(), " local tensors for ", placement.size(), " devices");
  if (sbp.depth() == 1) { return ReconstructLevel(locals, sbp[0]); }
  const int rows = placement.level_extent(0);
  const int cols = placement.level_extent(1);
  std::vector<Tensor> row_values;
  for (int r = 0; r < rows; ++r) {
    row_values.push_back(ReconstructLevel(locals.subspan(r * cols, cols), sbp[1]));
  }
  return ReconstructLevel(row_values, sbp[0]);
}

std::vector<Shape> LocalShapes(const Shape& global, const NdSbp& sbp, const Placement& placement) {
  CheckDepth(sbp, placement);
  if (sbp.depth() == 1) { return ShapeLevel(global, sbp[0], placement.size()); }
  std::vector<Shape> out;
  for (const Shape& row : ShapeLevel(global, sbp[0], placement.level_extent(0))) {
    for (Shape& s : ShapeLevel(row, sbp[1], placement.level_extent(1))) { out.push_back(std::move(s)); }
  }
  return out;
}

bool IsValidFor(const NdSbp& sbp, const Shape& global, const Placement& placement) {
  if (sbp.depth() != placement.hierarchy_depth()) { return false; }
  try {
    LocalShapes(global, sbp, placement);
  } catch (const Error&) {
    return false;
  }
  return true;
}

std::optional<SbpComponent> InferMatMulSbp(const SbpComponent& x, const SbpComponent& w) {
  using C = SbpComponent;
  const C s0 = C::Split(0), s1 = C::Split(1), b = C::Broadcast(), p = C::Partial(ReduceKind::kSum);
  if (x == s0 && w == b) { return s0; }
  if (x == b && w == s1) { return s1; }
  if (x == s1 && w == s0) { return p; }
  if (x == p && w == b) { return p; }
  if (x == b && w == p) { return p; }
  if (x == b && w == b) { return b; }
  return std::nullopt;
}

std::optional<NdSbp> InferMatMulSbp2d(const NdSbp& x, const NdSbp& w) {
  if (x.depth() != w.depth() || x.depth() == 0) { return std::nullopt; }
  NdSbp out;
  for (int level = 0; level < x.depth(); ++level) {
    auto comp = InferMatMulSbp(x[level], w[level]);
    if (!comp) { return std::nullopt; }
    out.components.push_back(*comp);
  }
  return out;
}

namespace {

std::vector<SbpComponent> InferLevel(const OpKind& kind, std::span<const SbpComponent> in) {
  const SbpComponent partial_sum = SbpComponent::Partial(ReduceKind::kSum);
  switch (kind.type) {
    case OpType::kMatMul: {
      auto out = InferMatMulSbp(in[0], in[1]);
      if (out) { return {*out}; }
      return {};
    }
    case OpType::kAdd:
      if (in[0] == in[1] && (!in[0].is_partial() || in[0] == partial_sum)) { return {in[0]}; }
      return {};
    case OpType::kRelu:
      if (in[0].is_partial()) { return {}; }
      return {in[0]};
    case OpType::kReduceSum: {
      const SbpComponent& x = in[0];
      if (x.is_split()) {
        if (x.axis == kind.axis) { return {partial_sum}; }
        return {SbpComponent::Split(x.axis < kind.axis ? x.axis : x.axis - 1)};
      }
      if (x.is_broadcast() || x == partial_sum) { return {x}; }
      return {};
    }
    case OpType::kIdentity: return {in[0]};
    case OpType::kSource: return {};
  }
  return {};
}

}  // namespace

std::vector<OpSbpSignature> InferOpSbp(const OpKind& kind, std::span<const NdSbp> inputs) {
  MF_CHECK(static_cast<int>(inputs.size()) == Arity(kind.type), ErrorCode::kInvalidArgument,
           OpKindToString(kind), " expects ", Arity(kind.type), " input signatures, got ", inputs.size());
  if (inputs.empty()) { return {}; }
  const int depth = inputs[0].depth();
  for (const NdSbp& s : inputs) {
    if (s.depth() != depth) { return {}; }
  }
  std::vector<NdSbp> outputs{NdSbp{}};
  for (int level = 0; level < depth; ++level) {
    std::vector<SbpComponent> comps;
    for (const NdSbp& s : inputs) { comps.push_back(s[level]); }
    std::vector<SbpComponent> level_out = InferLevel(kind, comps);
    std::vector<NdSbp> next;
    for (const NdSbp& prefix : outputs) {
      for (const SbpComponent& c : level_out) {
        NdSbp extended = prefix;
        extended.components.push_back(c);
        next.push_back(std::move(extended));
      }
    }
    outputs = std::move(next);
  }
  std::vector<OpSbpSignature> result;
  for (NdSbp& out : outputs) {
    result.push_back({std::vector<NdSbp>(inputs.begin(), inputs.end()), std::move(out)});
  }
  return result;
}

namespace {

// All annotations of `shape` on `placement` built from the given per-level menu.
std::vector<NdSbp> CandidateAnnotations(const Shape& shape, const Placement& placement, bool with_partial) {
  std::vector<SbpComponent> menu;
  for (int64_t a = 0; a < static_cast<int64_t>(shape.size()); ++a) { menu.push_back(SbpComponent::Split(a)); }
  menu.push_back(SbpComponent::Broadcast());
  if (with_partial) { menu.push_back(SbpComponent::Partial(ReduceKind::kSum)); }
  std::vector<NdSbp> all{NdSbp{}};
  for (int level = 0; level < placement.hierarchy_depth(); ++level) {
    std::vector<NdSbp> next;
    for (const NdSbp& prefix : all) {
      for (const SbpComponent& c : menu) {
        NdSbp extended = prefix;
        extended.components.push_back(c);
        next.push_back(std::move(extended));
      }
    }
    all = std::move(next);
  }
  std::vector<NdSbp> valid;
  for (NdSbp& s : all) {
    if (IsValidFor(s, shape, placement)) { valid.push_back(std::move(s)); }
  }
  return valid;
}

}  // namespace

std::vector<OpSbpSignature> EnumerateSignatures(const OpKind& kind, std::span<const Shape> input_shapes,
                                                const Shape& source_shape, const Placement& placement) {
  std::vector<OpSbpSignature> result;
  if (kind.type == OpType::kSource) {
    for (NdSbp& s : CandidateAnnotations(source_shape, placement, /*with_partial=*/false)) {
      result.push_back({{}, std::move(s)});
    }
    return result;
  }
  const Shape out_shape = InferKernelShape(kind, input_shapes);
  std::vector<std::vector<NdSbp>> per_input;
  for (const Shape& s : input_shapes) {
    per_input.push_back(CandidateAnnotations(s, placement, true));
    if (per_input.back().empty()) { return result; }
  }
  std::vector<size_t> idx(per_input.size(), 0);
  while (true) {
    std::vector<NdSbp> combo;
    for (size_t i = 0; i < per_input.size(); ++i) { combo.push_back(per_input[i][idx[i]]); }
    for (OpSbpSignature& sig : InferOpSbp(kind, combo)) {
      if (IsValidFor(sig.output, out_shape, placement) &&
          std::find(result.begin(), result.end(), sig) == result.end()) {
        result.push_back(std::move(sig));
      }
    }
    size_t k = 0;
    while (k < idx.size() && ++idx[k] == per_input[k].size()) {
      idx[k] = 0;
      ++k;
    }
    if (k == idx.size()) { break; }
  }
  return result;
}

}  // namespace meshflow

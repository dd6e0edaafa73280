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
#include "meshflow/boxing.h"

#include <algorithm>

#include "meshflow/error.h"

namespace meshflow {

const char* BoxingPrimitiveName(BoxingPrimitive primitive) {
  switch (primitive) {
    case BoxingPrimitive::kIdentity: return "Identity";
    case BoxingPrimitive::kAll2All: return "All2All";
    case BoxingPrimitive::kAllGather: return "AllGather";
    case BoxingPrimitive::kReduceScatter: return "ReduceScatter";
    case BoxingPrimitive::kAllReduce: return "AllReduce";
    case BoxingPrimitive::kScatter: return "Scatter";
    case BoxingPrimitive::kBroadcastCopy: return "BroadcastCopy";
    case BoxingPrimitive::kGatherReduce: return "GatherReduce";
    case BoxingPrimitive::kOne2One: return "One2One";
    case BoxingPrimitive::kStaging: return "Staging";
  }
  return "?";
}

int64_t TransferCost(const SbpComponent& src, const SbpComponent& dst, int64_t tensor_bytes,
                     const TransferRegime& regime) {
  MF_CHECK(tensor_bytes >= 0, ErrorCode::kInvalidArgument, "negative tensor size");
  MF_CHECK(regime.p1 >= 1 && regime.p2 >= 1, ErrorCode::kInvalidArgument, "device counts must be positive");
  const int64_t t = tensor_bytes;
  const int64_t p1 = regime.p1;
  const int64_t p2 = regime.p2;
  if (regime.same_devices) {
    switch (src.type) {
      case SbpType::kSplit:
        if (dst.is_split()) {
          if (dst.axis == src.axis) { return 0; }
          // (p1 - 1) / p1 * t, rounded half up.
          return ((p1 - 1) * t * 2 + p1) / (2 * p1);
        }
        return dst.is_broadcast() ? (p1 - 1) * t : 0;
      case SbpType::kBroadcast: return 0;
      case SbpType::kPartial:
        if (dst.is_split()) { return (p1 - 1) * t; }
        if (dst.is_broadcast()) { return 2 * (p1 - 1) * t; }
        return 0;
    }
  }
  switch (src.type) {
    case SbpType::kSplit:
    case SbpType::kBroadcast: return dst.is_broadcast() ? p2 * t : t;
    case SbpType::kPartial: return dst.is_broadcast() ? (p1 + p2 - 1) * t : p1 * t;
  }
  return 0;
}

BoxingPrimitive ChoosePrimitive(const SbpComponent& src, const SbpComponent& dst,
                                const TransferRegime& regime) {
  if (regime.same_devices) {
    if (src.is_split() && dst.is_split() && src.axis != dst.axis) { return BoxingPrimitive::kAll2All; }
    if (src.is_split() && dst.is_broadcast()) { return BoxingPrimitive::kAllGather; }
    if (src.is_partial() && dst.is_split()) { return BoxingPrimitive::kReduceScatter; }
    if (src.is_partial() && dst.is_broadcast()) { return BoxingPrimitive::kAllReduce; }
    return BoxingPrimitive::kIdentity;
  }
  if (src.is_partial()) { return BoxingPrimitive::kGatherReduce; }
  if (dst.is_broadcast()) { return BoxingPrimitive::kBroadcastCopy; }
  if (src.is_broadcast() && dst.is_split()) { return BoxingPrimitive::kScatter; }
  return BoxingPrimitive::kOne2One;
}

namespace {

enum class Route { kSameFlat, kDisjointFlat, kRowGroups, kStaging };

Route ChooseRoute(const NdSbp& src, const NdSbp& dst, const Placement& sp, const Placement& dp) {
  if (sp == dp) {
    if (src.depth() == 1 && dst.depth() == 1) { return Route::kSameFlat; }
    if (src.depth() == 2 && dst.depth() == 2 && src[0] == dst[0]) { return Route::kRowGroups; }
    return Route::kStaging;
  }
  if (sp.SameDevices(dp)) { return Route::kStaging; }
  MF_CHECK(sp.Disjoint(dp), ErrorCode::kInvalidArgument, "placements ", sp.ToString(), " and ",
           dp.ToString(), " partially overlap");
  if (src.depth() == 1 && dst.depth() == 1) { return Route::kDisjointFlat; }
  return Route::kStaging;
}

void CheckReduceKinds(const NdSbp& src, const NdSbp& dst) {
  for (int l = 0; l < src.depth() && l < dst.depth(); ++l) {
    if (src[l].is_partial() && dst[l].is_partial()) {
      MF_CHECK(src[l].reduce == dst[l].reduce, ErrorCode::kInvalidArgument,
               "cannot box between partial kinds ", src[l].ToString(), " and ", dst[l].ToString());
    }
  }
}

std::vector<int64_t> Offsets(const std::vector<int64_t>& extents) {
  std::vector<int64_t> off(extents.size(), 0);
  for (size_t i = 1; i < extents.size(); ++i) { off[i] = off[i - 1] + extents[i - 1]; }
  return off;
}

// One-level boxing among the same p devices. `global` is the logical shape
// at this level.
BoxingResult BoxSameFlat(std::span<const Tensor> in, const SbpComponent& src, const SbpComponent& dst,
                         const Shape& global) {
  const int p = static_cast<int>(in.size());
  BoxingResult r;
  r.primitive = ChoosePrimitive(src, dst, TransferRegime::Same(p));
  r.locals.assign(in.begin(), in.end());
  if (src == dst) { return r; }

  if (src.is_split() && dst.is_split()) {
    const std::vector<int64_t> len = ShardExtents(global[dst.axis], p);
    const std::vector<int64_t> off = Offsets(len);
    for (int d = 0; d < p; ++d) {
      std::vector<Tensor> pieces;
      for (int s = 0; s < p; ++s) {
        pieces.push_back(Slice(in[s], dst.axis, off[d], len[d]));
        if (s != d) { r.bytes_moved += pieces.back().bytes(); }
      }
      r.locals[d] = Concat(pieces, src.axis);
    }
  } else if (src.is_split() && dst.is_broadcast()) {
    const Tensor full = Concat(in, src.axis);
    for (int d = 0; d < p; ++d) {
      r.bytes_moved += full.bytes() - in[d].bytes();
      r.locals[d] = full;
    }
  } else if (src.is_split() && dst.is_partial()) {
    const std::vector<int64_t> off = Offsets(ShardExtents(global[src.axis], p));
    for (int d = 0; d < p; ++d) {
      Tensor padded = Tensor::Filled(global, ReductionIdentity(dst.reduce));
      Embed(padded, in[d], src.axis, off[d]);
      r.locals[d] = std::move(padded);
    }
  } else if (src.is_broadcast() && dst.is_split()) {
    const std::vector<int64_t> len = ShardExtents(global[dst.axis], p);
    const std::vector<int64_t> off = Offsets(len);
    for (int d = 0; d < p; ++d) { r.locals[d] = Slice(in[d], dst.axis, off[d], len[d]); }
  } else if (src.is_broadcast() && dst.is_partial()) {
    for (int d = 1; d < p; ++d) { r.locals[d] = Tensor::Filled(global, ReductionIdentity(dst.reduce)); }
  } else if (src.is_partial() && dst.is_split()) {
    // Reduce-scatter: device d reduces shard d received from every peer.
    const std::vector<int64_t> len = ShardExtents(global[dst.axis], p);
    const std::vector<int64_t> off = Offsets(len);
    for (int d = 0; d < p; ++d) {
      std::vector<Tensor> pieces;
      for (int s = 0; s < p; ++s) {
        pieces.push_back(Slice(in[s], dst.axis, off[d], len[d]));
        if (s != d) { r.bytes_moved += pieces.back().bytes(); }
      }
      r.locals[d] = ReduceElementwise(src.reduce, pieces);
    }
  } else if (src.is_partial() && dst.is_broadcast()) {
    // All-reduce as reduce-scatter over flat chunks followed by all-gather.
    const int64_t n = NumElements(global);
    std::vector<double> reduced(n);
    int64_t begin = 0;
    for (int c = 0; c < p; ++c) {
      const int64_t len = n / p + (c < n % p ? 1 : 0);
      for (int64_t i = begin; i < begin + len; ++i) {
        double acc = in[0][i];
        for (int s = 1; s < p; ++s) {
          acc = src.reduce == ReduceKind::kSum ? acc + in[s][i] : std::max(acc, in[s][i]);
        }
        reduced[i] = acc;
      }
      r.bytes_moved += 2 * (p - 1) * len * static_cast<int64_t>(sizeof(double));
      begin += len;
    }
    const Tensor full(global, std::move(reduced));
    for (int d = 0; d < p; ++d) { r.locals[d] = full; }
  }
  return r;
}

int64_t SumBytes(std::span<const Tensor> ts) {
  int64_t total = 0;
  for (const Tensor& t : ts) { total += t.bytes(); }
  return total;
}

BoxingResult BoxDisjointFlat(std::span<const Tensor> in, const Tensor& global, const SbpComponent& src,
                             const SbpComponent& dst, const Placement& dp) {
  BoxingResult r;
  const int64_t p1 = static_cast<int64_t>(in.size());
  const int64_t p2 = dp.size();
  r.primitive = ChoosePrimitive(src, dst, TransferRegime::Disjoint(static_cast<int>(p1), static_cast<int>(p2)));
  r.locals = Materialize(global, NdSbp{dst}, dp);
  const int64_t t = global.bytes();
  const int64_t dst_bytes = SumBytes(r.locals);
  if (!src.is_partial()) {
    // Every destination byte is fetched once; a partial destination only
    // needs the full tensor on its first device.
    r.bytes_moved = dst.is_partial() ? t : dst_bytes;
  } else if (dst.is_split()) {
    r.bytes_moved = p1 * dst_bytes;
  } else if (dst.is_broadcast()) {
    r.bytes_moved = p1 * t + (p2 - 1) * t;
  } else {
    r.bytes_moved = p1 * t;
  }
  return r;
}

BoxingResult BoxStaging(std::span<const Tensor> in, const Tensor& global, const NdSbp& dst,
                        const Placement& sp, const Placement& dp) {
  BoxingResult r;
  r.primitive = BoxingPrimitive::kStaging;
  r.locals = Materialize(global, dst, dp);
  const DeviceCoord stage = dp.device(0);
  for (int i = 0; i < sp.size(); ++i) {
    if (sp.device(i) != stage) { r.bytes_moved += in[i].bytes(); }
  }
  for (int i = 0; i < dp.size(); ++i) {
    if (dp.device(i) != stage) { r.bytes_moved += r.locals[i].bytes(); }
  }
  return r;
}

}  // namespace

BoxingPrimitive ChoosePrimitive(const NdSbp& src, const NdSbp& dst, const Placement& src_placement,
                                const Placement& dst_placement) {
  switch (ChooseRoute(src, dst, src_placement, dst_placement)) {
    case Route::kSameFlat: return ChoosePrimitive(src[0], dst[0], TransferRegime::Same(src_placement.size()));
    case Route::kDisjointFlat:
      return ChoosePrimitive(src[0], dst[0], TransferRegime::Disjoint(src_placement.size(), dst_placement.size()));
    case Route::kRowGroups:
      return ChoosePrimitive(src[1], dst[1], TransferRegime::Same(src_placement.level_extent(1)));
    case Route::kStaging: return BoxingPrimitive::kStaging;
  }
  return BoxingPrimitive::kStaging;
}

BoxingResult ApplyBoxing(std::span<const Tensor> locals, const NdSbp& src, const NdSbp& dst,
                         const Placement& src_placement, const Placement& dst_placement) {
  CheckReduceKinds(src, dst);
  MF_CHECK(dst.depth() == dst_placement.hierarchy_depth(), ErrorCode::kInvalidArgument, "SBP ",
           dst.ToString(), " does not fit placement ", dst_placement.ToString());
  const Route route = ChooseRoute(src, dst, src_placement, dst_placement);

  // Validates the inputs: broadcast copies must agree and every local must
  // have exactly the shape the source annotation implies.
  const Tensor global = Reconstruct(locals, src, src_placement);
  const std::vector<Shape> expected = LocalShapes(global.shape(), src, src_placement);
  for (size_t i = 0; i < locals.size(); ++i) {
    MF_CHECK(locals[i].shape() == expected[i], ErrorCode::kConsistency, "local ", i, " has shape ",
             ShapeToString(locals[i].shape()), " but ", src.ToString(), " implies ",
             ShapeToString(expected[i]));
  }
  MF_CHECK(IsValidFor(dst, global.shape(), dst_placement), ErrorCode::kShape, "annotation ", dst.ToString(),
           " cannot lay out a tensor of shape ", ShapeToString(global.shape()), " on ",
           dst_placement.ToString());

  switch (route) {
    case Route::kSameFlat: return BoxSameFlat(locals, src[0], dst[0], global.shape());
    case Route::kDisjointFlat: return BoxDisjointFlat(locals, global, src[0], dst[0], dst_placement);
    case Route::kRowGroups: {
      // Level 0 already agrees, so each row re-lays out its own row value.
      const int rows = src_placement.level_extent(0);
      const int cols = src_placement.level_extent(1);
      std::vector<Shape> row_shapes(rows, global.shape());
      if (src[0].is_split()) {
        const std::vector<int64_t> len = ShardExtents(global.extent(src[0].axis), rows);
        for (int row = 0; row < rows; ++row) { row_shapes[row][src[0].axis] = len[row]; }
      }
      BoxingResult r;
      r.primitive = ChoosePrimitive(src[1], dst[1], TransferRegime::Same(cols));
      for (int row = 0; row < rows; ++row) {
        BoxingResult part = BoxSameFlat(locals.subspan(row * cols, cols), src[1], dst[1], row_shapes[row]);
        r.bytes_moved += part.bytes_moved;
        for (Tensor& t : part.locals) { r.locals.push_back(std::move(t)); }
      }
      return r;
    }
    case Route::kStaging: return BoxStaging(locals, global, dst, src_placement, dst_placement);
  }
  return {};
}

int64_t BoxingBytes(const Shape& global, const NdSbp& src, const NdSbp& dst, const Placement& src_placement,
                    const Placement& dst_placement) {
  const std::vector<Tensor> locals = Materialize(Tensor::Zeros(global), src, src_placement);
  return ApplyBoxing(locals, src, dst, src_placement, dst_placement).bytes_moved;
}

int64_t EstimateTransferBytes(const Shape& global, const NdSbp& src, const NdSbp& dst,
                              const Placement& src_placement, const Placement& dst_placement) {
  if (src_placement == dst_placement && src == dst) { return 0; }
  const Route route = ChooseRoute(src, dst, src_placement, dst_placement);
  if (route == Route::kSameFlat || route == Route::kDisjointFlat) {
    CheckReduceKinds(src, dst);
    const TransferRegime regime = route == Route::kSameFlat
                                      ? TransferRegime::Same(src_placement.size())
                                      : TransferRegime::Disjoint(src_placement.size(), dst_placement.size());
    return TransferCost(src[0], dst[0], NumElements(global) * static_cast<int64_t>(sizeof(double)), regime);
  }
  return BoxingBytes(global, src, dst, src_placement, dst_placement);
}

}  // namespace meshflow

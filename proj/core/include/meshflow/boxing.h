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
#ifndef MESHFLOW_BOXING_H_
#define MESHFLOW_BOXING_H_

#include <cstdint>
#include <span>
#include <vector>

#include "meshflow/placement.h"
#include "meshflow/sbp.h"
#include "meshflow/tensor.h"

namespace meshflow {

enum class BoxingPrimitive {
  kIdentity,
  kAll2All,
  kAllGather,
  kReduceScatter,
  kAllReduce,
  kScatter,
  kBroadcastCopy,
  kGatherReduce,
  kOne2One,
  // Gather everything on one device and redistribute; used for
  // hierarchical transfers that do not decompose into one level.
  kStaging,
};

const char* BoxingPrimitiveName(BoxingPrimitive primitive);

struct TransferRegime {
  bool same_devices = true;
  int p1 = 1;  // producer device count
  int p2 = 1;  // consumer device count

  static TransferRegime Same(int p) { return {true, p, p}; }
  static TransferRegime Disjoint(int p1, int p2) { return {false, p1, p2}; }
};

// Bytes moved when a tensor of `tensor_bytes` changes annotation from `src`
// to `dst`. The fractional all2all cell rounds half up.
int64_t TransferCost(const SbpComponent& src, const SbpComponent& dst, int64_t tensor_bytes,
                     const TransferRegime& regime);

BoxingPrimitive ChoosePrimitive(const SbpComponent& src, const SbpComponent& dst,
                                const TransferRegime& regime);
// Primitive used by ApplyBoxing for a full (possibly hierarchical) transfer.
BoxingPrimitive ChoosePrimitive(const NdSbp& src, const NdSbp& dst, const Placement& src_placement,
                                const Placement& dst_placement);

struct BoxingResult {
  std::vector<Tensor> locals;
  int64_t bytes_moved = 0;
  BoxingPrimitive primitive = BoxingPrimitive::kIdentity;
};

// Re-lays out `locals` (consistent with `src` on `src_placement`) so they
// are consistent with `dst` on `dst_placement`, counting every byte that
// crosses a device boundary. Placements must be identical or disjoint.
BoxingResult ApplyBoxing(std::span<const Tensor> locals, const NdSbp& src, const NdSbp& dst,
                         const Placement& src_placement, const Placement& dst_placement);

// Bytes ApplyBoxing would move for a tensor of shape `global`.
int64_t BoxingBytes(const Shape& global, const NdSbp& src, const NdSbp& dst, const Placement& src_placement,
                    const Placement& dst_placement);

// Planning estimate: the transfer table for flat annotations on identical or
// disjoint placements, simulated bytes otherwise. Zero when nothing changes.
int64_t EstimateTransferBytes(const Shape& global, const NdSbp& src, const NdSbp& dst,
                              const Placement& src_placement, const Placement& dst_placement);

}  // namespace meshflow

#endif  // MESHFLOW_BOXING_H_

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
#include "meshflow/actor_id.h"

#include <cstdio>

#include "meshflow/error.h"

namespace meshflow {

ActorId EncodeActorId(uint64_t node, uint64_t thread, uint64_t seq) {
  MF_CHECK(node <= 0xFFFF, ErrorCode::kInvalidArgument, "node ", node, " does not fit in 16 bits");
  MF_CHECK(thread <= 0xFFFF, ErrorCode::kInvalidArgument, "thread ", thread, " does not fit in 16 bits");
  MF_CHECK(seq <= 0xFFFFFFFFull, ErrorCode::kInvalidArgument, "sequence ", seq, " does not fit in 32 bits");
  return (node << 48) | (thread << 32) | seq;
}

ActorAddress ParseActorId(ActorId id) {
  return {static_cast<uint32_t>(id >> 48), static_cast<uint32_t>((id >> 32) & 0xFFFF),
          static_cast<uint32_t>(id & 0xFFFFFFFFull)};
}

std::string ActorIdHex(ActorId id) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(id));
  return buf;
}

}  // namespace meshflow

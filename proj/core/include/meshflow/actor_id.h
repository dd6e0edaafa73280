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
#ifndef MESHFLOW_ACTOR_ID_H_
#define MESHFLOW_ACTOR_ID_H_

#include <cstdint>
#include <string>

namespace meshflow {

// 64-bit hierarchical address: node (16 bits) | thread (16 bits) | sequence (32 bits).
using ActorId = uint64_t;

struct ActorAddress {
  uint32_t node = 0;
  uint32_t thread = 0;
  uint32_t seq = 0;

  bool operator==(const ActorAddress&) const = default;
};

ActorId EncodeActorId(uint64_t node, uint64_t thread, uint64_t seq);
ActorAddress ParseActorId(ActorId id);

// `0x0001000200000007`
std::string ActorIdHex(ActorId id);

}  // namespace meshflow

#endif  // MESHFLOW_ACTOR_ID_H_

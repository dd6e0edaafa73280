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
#ifndef MESHFLOW_PLACEMENT_H_
#define MESHFLOW_PLACEMENT_H_

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace meshflow {

struct DeviceCoord {
  int node = 0;
  int device = 0;

  auto operator<=>(const DeviceCoord&) const = default;
  std::string ToString() const;
};

struct MeshShape {
  int rows = 1;
  int cols = 1;

  bool operator==(const MeshShape&) const = default;
};

// Ordered device list an op runs on. With a mesh shape the devices are
// laid out row-major: device index = row * cols + col, and SBP level 0
// distributes across rows while level 1 distributes within a row.
class Placement {
 public:
  Placement() = default;
  explicit Placement(std::vector<DeviceCoord> devices, std::optional<MeshShape> mesh = std::nullopt);

  // Convenience: `{node: [d0, d1, ...]}` on a single node.
  static Placement OnNode(int node, std::vector<int> devices);

  const std::vector<DeviceCoord>& devices() const { return devices_; }
  int size() const { return static_cast<int>(devices_.size()); }
  const DeviceCoord& device(int i) const { return devices_.at(i); }
  const std::optional<MeshShape>& mesh() const { return mesh_; }

  int hierarchy_depth() const { return mesh_ ? 2 : 1; }
  // Number of parts at SBP level `level`.
  int level_extent(int level) const;

  bool SameDevices(const Placement& other) const;
  bool Disjoint(const Placement& other) const;
  int IndexOf(const DeviceCoord& coord) const;

  bool operator==(const Placement&) const = default;

  // `{0:[0,1],1:[0,1]}`; the mesh is printed separately by the graph text format.
  std::string ToString() const;

 private:
  std::vector<DeviceCoord> devices_;
  std::optional<MeshShape> mesh_;
};

}  // namespace meshflow

#endif  // MESHFLOW_PLACEMENT_H_

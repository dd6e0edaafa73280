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
#include "meshflow/placement.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "meshflow/error.h"

namespace meshflow {

std::string DeviceCoord::ToString() const {
  return std::to_string(node) + ":" + std::to_string(device);
}

Placement::Placement(std::vector<DeviceCoord> devices, std::optional<MeshShape> mesh)
    : devices_(std::move(devices)), mesh_(mesh) {
  MF_CHECK(!devices_.empty(), ErrorCode::kInvalidArgument, "placement needs at least one device");
  std::set<DeviceCoord> seen;
  for (const DeviceCoord& d : devices_) {
    MF_CHECK(d.node >= 0 && d.device >= 0, ErrorCode::kInvalidArgument, "negative device coordinate ",
             d.ToString());
    MF_CHECK(seen.insert(d).second, ErrorCode::kInvalidArgument, "duplicate device ", d.ToString(),
             " in placement");
  }
  if (mesh_) {
    MF_CHECK(mesh_->rows >= 1 && mesh_->cols >= 1 && mesh_->rows * mesh_->cols == size(),
             ErrorCode::kInvalidArgument, "mesh ", mesh_->rows, "x", mesh_->cols, " does not match ",
             size(), " devices");
  }
}

Placement Placement::OnNode(int node, std::vector<int> devices) {
  std::vector<DeviceCoord> coords;
  for (int d : devices) { coords.push_back({node, d}); }
  return Placement(std::move(coords));
}

int Placement::level_extent(int level) const {
  if (!mesh_) {
    MF_CHECK(level == 0, ErrorCode::kInvalidArgument, "flat placement has a single level");
    return size();
  }
  MF_CHECK(level == 0 || level == 1, ErrorCode::kInvalidArgument, "mesh placement has two levels");
  return level == 0 ? mesh_->rows : mesh_->cols;
}

bool Placement::SameDevices(const Placement& other) const {
  std::vector<DeviceCoord> a = devices_, b = other.devices_;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

bool Placement::Disjoint(const Placement& other) const {
  for (const DeviceCoord& d : devices_) {
    if (other.IndexOf(d) >= 0) { return false; }
  }
  return true;
}

int Placement::IndexOf(const DeviceCoord& coord) const {
  auto it = std::find(devices_.begin(), devices_.end(), coord);
  return it == devices_.end() ? -1 : static_cast<int>(it - devices_.begin());
}

std::string Placement::ToString() const {
  std::ostringstream os;
  os << "{";
  size_t i = 0;
  bool first_group = true;
  while (i < devices_.size()) {
    const int node = devices_[i].node;
    os << (first_group ? "" : ",") << node << ":[";
    bool first = true;
    for (; i < devices_.size() && devices_[i].node == node; ++i) {
      os << (first ? "" : ",") << devices_[i].device;
      first = false;
    }
    os << "]";
    first_group = false;
  }
  os << "}";
  return os.str();
}

}  // namespace meshflow

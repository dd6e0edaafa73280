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
#ifndef MESHFLOW_GRAPH_TEXT_H_
#define MESHFLOW_GRAPH_TEXT_H_

#include <string>
#include <string_view>

#include "meshflow/graph.h"

namespace meshflow {

// Line-oriented graph description; see docs/formats.md. Syntax errors throw
// ParseError with the 1-based line and column of the offending token.
LogicalGraph ParseGraphText(std::string_view text);

// Canonical form: ParseGraphText(PrintGraphText(g)) == g.
std::string PrintGraphText(const LogicalGraph& graph);

LogicalGraph LoadGraphFile(const std::string& path);

Placement ParsePlacement(const std::string& text, std::optional<MeshShape> mesh = std::nullopt);
// `{0:[0,1]}` followed by ` mesh=RxC` when the placement has a mesh.
std::string PlacementAttrs(const Placement& placement);

}  // namespace meshflow

#endif  // MESHFLOW_GRAPH_TEXT_H_

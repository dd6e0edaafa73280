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
#include "meshflow/graph_text.h"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "meshflow/error.h"

namespace meshflow {

namespace {

struct Token {
  std::string text;
  int column = 1;  // 1-based
};

// Splits on whitespace outside brackets so `{0: [0, 1]}` stays one token.
std::vector<Token> Tokenize(const std::string& line, int line_no) {
  std::vector<Token> tokens;
  int depth = 0;
  Token cur;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '#' && depth == 0) { break; }
    if ((c == ' ' || c == '\t' || c == '\r') && depth == 0) {
      if (!cur.text.empty()) { tokens.push_back(std::move(cur)); }
      cur = Token{};
      continue;
    }
    if (cur.text.empty()) { cur.column = static_cast<int>(i) + 1; }
    if (c == '(' || c == '[' || c == '{') { ++depth; }
    if (c == ')' || c == ']' || c == '}') {
      if (--depth < 0) { throw ParseError(line_no, static_cast<int>(i) + 1, "unbalanced bracket"); }
    }
    if (c != ' ' && c != '\t') { cur.text += c; }
  }
  if (depth != 0) { throw ParseError(line_no, static_cast<int>(line.size()) + 1, "unclosed bracket"); }
  if (!cur.text.empty()) { tokens.push_back(std::move(cur)); }
  return tokens;
}

// Splits `a,b,c` on commas outside brackets.
std::vector<std::string> SplitTopLevel(const std::string& text) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == '[' || c == '{') { ++depth; }
    if (c == ')' || c == ']' || c == '}') { --depth; }
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !parts.empty()) { parts.push_back(cur); }
  return parts;
}

std::string Unwrap(const std::string& text, char open, char close) {
  MF_CHECK(text.size() >= 2 && text.front() == open && text.back() == close, ErrorCode::kParse, "expected ",
           open, "...", close, " but got '", text, "'");
  return text.substr(1, text.size() - 2);
}

int64_t ParseInt(const std::string& text) {
  MF_CHECK(!text.empty(), ErrorCode::kParse, "expected an integer");
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  MF_CHECK(errno == 0 && *end == '\0', ErrorCode::kParse, "bad integer '", text, "'");
  return v;
}

double ParseDouble(const std::string& text) {
  MF_CHECK(!text.empty(), ErrorCode::kParse, "expected a number");
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  MF_CHECK(*end == '\0', ErrorCode::kParse, "bad number '", text, "'");
  return v;
}

Shape ParseShape(const std::string& text) {
  Shape shape;
  for (const std::string& part : SplitTopLevel(Unwrap(text, '[', ']'))) { shape.push_back(ParseInt(part)); }
  return shape;
}

std::vector<double> ParseValues(const std::string& text) {
  std::vector<double> values;
  for (const std::string& part : SplitTopLevel(Unwrap(text, '[', ']'))) { values.push_back(ParseDouble(part)); }
  return values;
}

MeshShape ParseMesh(const std::string& text) {
  const size_t x = text.find('x');
  MF_CHECK(x != std::string::npos, ErrorCode::kParse, "mesh must look like RxC, got '", text, "'");
  return MeshShape{static_cast<int>(ParseInt(text.substr(0, x))), static_cast<int>(ParseInt(text.substr(x + 1)))};
}

std::vector<std::optional<NdSbp>> ParseInSbp(const std::string& text) {
  std::vector<std::optional<NdSbp>> out;
  for (const std::string& part : SplitTopLevel(Unwrap(text, '[', ']'))) {
    if (part == "-") {
      out.push_back(std::nullopt);
    } else {
      out.push_back(ParseNdSbp(part));
    }
  }
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string JoinList(const std::vector<T>& items, F&& format) {
  std::string out = "[";
  for (size_t i = 0; i < items.size(); ++i) { out += (i ? "," : "") + format(items[i]); }
  return out + "]";
}

struct KeyValue {
  std::string key;
  std::string value;
  int column = 1;        // of the key
  int value_column = 1;  // of the value
};

KeyValue SplitKeyValue(const Token& tok, int line_no) {
  const size_t eq = tok.text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ParseError(line_no, tok.column, "expected key=value, got '" + tok.text + "'");
  }
  return {tok.text.substr(0, eq), tok.text.substr(eq + 1), tok.column, tok.column + static_cast<int>(eq) + 1};
}

// Runs `fn`, re-throwing library errors as ParseError at (line, column).
template <typename F>
auto AtPosition(int line, int column, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line, column, e.what());
  }
}

bool IsIdentifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) { return false; }
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) { return false; }
  }
  return true;
}

class Parser {
 public:
  LogicalGraph Run(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::vector<Token> tokens = Tokenize(line, line_no);
      if (tokens.empty()) { continue; }
      if (tokens[0].text == "op") {
        ParseOp(tokens, line_no);
      } else if (tokens[0].text == "edge") {
        ParseEdge(tokens, line_no);
      } else if (tokens[0].text == "transform") {
        ParseTransformLine(tokens, line_no);
      } else {
        throw ParseError(line_no, tokens[0].column, "unknown statement '" + tokens[0].text + "'");
      }
    }
    return std::move(graph_);
  }

 private:
  void ParseOp(const std::vector<Token>& t, int line_no) {
    if (t.size() < 3) {
      throw ParseError(line_no, t.back().column + static_cast<int>(t.back().text.size()),
                       "expected: op <id> <kind> key=value...");
    }
    LogicalOp op;
    op.id = t[1].text;
    if (!IsIdentifier(op.id)) { throw ParseError(line_no, t[1].column, "bad op id '" + op.id + "'"); }
    if (!ids_.insert(op.id).second) { throw ParseError(line_no, t[1].column, "duplicate op id '" + op.id + "'"); }
    if (!ParseOpType(t[2].text, &op.kind.type)) {
      throw ParseError(line_no, t[2].column, "unknown op kind '" + t[2].text + "'");
    }

    std::optional<std::string> placement_text;
    int placement_col = 0;
    std::optional<MeshShape> mesh;
    std::optional<std::vector<double>> values;
    int values_col = 0;
    bool has_shape = false, has_axis = false;
    std::set<std::string> seen;
    for (size_t i = 3; i < t.size(); ++i) {
      const KeyValue kv = SplitKeyValue(t[i], line_no);
      if (!seen.insert(kv.key).second) {
        throw ParseError(line_no, kv.column, "duplicate attribute '" + kv.key + "'");
      }
      const bool source = op.kind.type == OpType::kSource;
      AtPosition(line_no, kv.value_column, [&] {
        if (kv.key == "placement") {
          placement_text = kv.value;
          placement_col = kv.value_column;
        } else if (kv.key == "mesh") {
          mesh = ParseMesh(kv.value);
        } else if (kv.key == "sbp") {
          op.sbp = ParseNdSbp(kv.value);
        } else if (kv.key == "in_sbp") {
          op.in_sbp = ParseInSbp(kv.value);
        } else if (kv.key == "shape" && source) {
          op.shape = ParseShape(kv.value);
          has_shape = true;
        } else if (kv.key == "value" && source) {
          values = ParseValues(kv.value);
          values_col = kv.value_column;
        } else if (kv.key == "axis" && op.kind.type == OpType::kReduceSum) {
          op.kind.axis = ParseInt(kv.value);
          has_axis = true;
        } else if (kv.key == "ticks") {
          op.ticks = static_cast<int>(ParseInt(kv.value));
          MF_CHECK(op.ticks >= 1, ErrorCode::kParse, "ticks must be >= 1");
        } else if (kv.key == "workspace") {
          op.workspace = ParseInt(kv.value);
          MF_CHECK(op.workspace >= 0, ErrorCode::kParse, "workspace must be >= 0");
        } else {
          Throw(ErrorCode::kParse, "attribute '", kv.key, "' is not valid for ", OpTypeName(op.kind.type));
        }
      });
    }
    const int end_col = t.back().column + static_cast<int>(t.back().text.size());
    if (!placement_text) { throw ParseError(line_no, end_col, "op '" + op.id + "' needs placement={...}"); }
    op.placement = AtPosition(line_no, placement_col, [&] { return ParsePlacement(*placement_text, mesh); });
    if (op.kind.type == OpType::kSource && !has_shape) {
      throw ParseError(line_no, end_col, "source '" + op.id + "' needs shape=[...]");
    }
    if (op.kind.type == OpType::kReduceSum && !has_axis) {
      throw ParseError(line_no, end_col, "reduce_sum '" + op.id + "' needs axis=k");
    }
    if (values) {
      op.value = AtPosition(line_no, values_col, [&] { return Tensor(op.shape, *values); });
    }
    graph_.AddOp(std::move(op));
  }

  // `<producer> -> <consumer>:<slot>` starting at t[1].
  Edge ParseArrow(const std::vector<Token>& t, int line_no) {
    if (t.size() < 4 || t[2].text != "->") {
      throw ParseError(line_no, t.size() > 2 ? t[2].column : t.back().column,
                       "expected: <producer> -> <consumer>:<slot>");
    }
    Edge e;
    e.producer = t[1].text;
    if (!ids_.count(e.producer)) { throw ParseError(line_no, t[1].column, "unknown op '" + e.producer + "'"); }
    const std::string& target = t[3].text;
    const size_t colon = target.rfind(':');
    e.consumer = target.substr(0, colon);
    if (!ids_.count(e.consumer)) { throw ParseError(line_no, t[3].column, "unknown op '" + e.consumer + "'"); }
    if (colon != std::string::npos) {
      e.slot = static_cast<int>(AtPosition(line_no, t[3].column + static_cast<int>(colon) + 1,
                                           [&] { return ParseInt(target.substr(colon + 1)); }));
    }
    return e;
  }

  void ParseEdge(const std::vector<Token>& t, int line_no) {
    const Edge e = ParseArrow(t, line_no);
    if (t.size() > 4) { throw ParseError(line_no, t[4].column, "trailing tokens after edge"); }
    graph_.AddEdge(e.producer, e.consumer, e.slot);
  }

  void ParseTransformLine(const std::vector<Token>& t, int line_no) {
    const Edge e = ParseArrow(t, line_no);
    std::optional<std::string> placement_text;
    std::optional<MeshShape> mesh;
    std::optional<NdSbp> sbp;
    int placement_col = 0;
    for (size_t i = 4; i < t.size(); ++i) {
      const KeyValue kv = SplitKeyValue(t[i], line_no);
      AtPosition(line_no, kv.value_column, [&] {
        if (kv.key == "placement") {
          placement_text = kv.value;
          placement_col = kv.value_column;
        } else if (kv.key == "mesh") {
          mesh = ParseMesh(kv.value);
        } else if (kv.key == "sbp") {
          sbp = ParseNdSbp(kv.value);
        } else {
          Throw(ErrorCode::kParse, "attribute '", kv.key, "' is not valid for a transform");
        }
      });
    }
    const int end_col = t.back().column + static_cast<int>(t.back().text.size());
    if (!placement_text || !sbp) { throw ParseError(line_no, end_col, "transform needs placement= and sbp="); }
    Transform tr{e.producer, e.consumer, e.slot,
                 AtPosition(line_no, placement_col, [&] { return ParsePlacement(*placement_text, mesh); }), *sbp};
    graph_.AddTransform(std::move(tr));
  }

  LogicalGraph graph_;
  std::set<std::string> ids_;
};

}  // namespace

Placement ParsePlacement(const std::string& text, std::optional<MeshShape> mesh) {
  std::vector<DeviceCoord> devices;
  for (const std::string& group : SplitTopLevel(Unwrap(text, '{', '}'))) {
    const size_t colon = group.find(':');
    MF_CHECK(colon != std::string::npos, ErrorCode::kParse, "expected node:[devices] in placement, got '", group,
             "'");
    const int node = static_cast<int>(ParseInt(group.substr(0, colon)));
    for (const std::string& d : SplitTopLevel(Unwrap(group.substr(colon + 1), '[', ']'))) {
      devices.push_back({node, static_cast<int>(ParseInt(d))});
    }
  }
  return Placement(std::move(devices), mesh);
}

std::string PlacementAttrs(const Placement& placement) {
  std::string out = "placement=" + placement.ToString();
  if (placement.mesh()) {
    out += " mesh=" + std::to_string(placement.mesh()->rows) + "x" + std::to_string(placement.mesh()->cols);
  }
  return out;
}

LogicalGraph ParseGraphText(std::string_view text) { return Parser().Run(text); }

std::string PrintGraphText(const LogicalGraph& graph) {
  std::ostringstream os;
  for (const LogicalOp& op : graph.ops()) {
    os << "op " << op.id << " " << OpTypeName(op.kind.type) << " " << PlacementAttrs(op.placement);
    if (op.kind.type == OpType::kSource) {
      os << " shape=" << JoinList(op.shape, [](int64_t v) { return std::to_string(v); });
      if (op.value) {
        std::vector<double> v(op.value->data().begin(), op.value->data().end());
        os << " value=" << JoinList(v, FormatDouble);
      }
    }
    if (op.kind.type == OpType::kReduceSum) { os << " axis=" << op.kind.axis; }
    if (op.sbp) { os << " sbp=" << op.sbp->ToString(); }
    if (!op.in_sbp.empty()) {
      os << " in_sbp=" << JoinList(op.in_sbp, [](const std::optional<NdSbp>& s) {
        return s ? s->ToString() : std::string("-");
      });
    }
    if (op.ticks != 1) { os << " ticks=" << op.ticks; }
    if (op.workspace != 0) { os << " workspace=" << op.workspace; }
    os << "\n";
  }
  for (const Edge& e : graph.edges()) { os << "edge " << e.producer << " -> " << e.consumer << ":" << e.slot << "\n"; }
  for (const Transform& t : graph.transforms()) {
    os << "transform " << t.producer << " -> " << t.consumer << ":" << t.slot << " " << PlacementAttrs(t.placement)
       << " sbp=" << t.sbp.ToString() << "\n";
  }
  return os.str();
}

LogicalGraph LoadGraphFile(const std::string& path) {
  std::ifstream in(path);
  MF_CHECK(in.good(), ErrorCode::kInvalidArgument, "cannot open '", path, "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseGraphText(buf.str());
}

}  // namespace meshflow

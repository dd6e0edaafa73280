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
#ifndef MESHFLOW_ERROR_H_
#define MESHFLOW_ERROR_H_

#include <sstream>
#include <stdexcept>
#include <string>

namespace meshflow {

enum class ErrorCode {
  kInvalidArgument,
  kShape,
  kParse,
  kCycle,
  kConsistency,
  kCompile,
  kRuntime,
  kProtocol,
  kDeadlock,
  kOutOfMemory,
  kCapacity,
  kRouting,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Parse errors carry the 1-based source position.
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& msg)
      : Error(ErrorCode::kParse,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

namespace detail {

inline void StreamAll(std::ostringstream&) {}

template<typename T, typename... Rest>
void StreamAll(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  StreamAll(os, rest...);
}

}  // namespace detail

template<typename... Args>
[[noreturn]] void Throw(ErrorCode code, const Args&... args) {
  std::ostringstream os;
  detail::StreamAll(os, args...);
  throw Error(code, os.str());
}

#define MF_CHECK(cond, code, ...)                          \
  do {                                                     \
    if (!(cond)) { ::meshflow::Throw(code, __VA_ARGS__); } \
  } while (0)

}  // namespace meshflow

#endif  // MESHFLOW_ERROR_H_

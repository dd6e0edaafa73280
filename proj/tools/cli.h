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
#ifndef MESHFLOW_TOOLS_CLI_H_
#define MESHFLOW_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace meshflow {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 1,
  kExitCompile = 2,
  kExitRuntime = 3,
  kExitCapacity = 4,
};

// Runs one command line (args[0] is the program name) and returns the exit
// code. Never throws.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace meshflow

#endif  // MESHFLOW_TOOLS_CLI_H_

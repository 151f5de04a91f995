// Copyright 2026 The shapemem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Subcommands behind the shapemem executable. Each returns a process exit
// code and never throws; diagnostics go to `err`.

#include <filesystem>
#include <ostream>

#include "shapemem/config.hpp"

namespace shapemem {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitCorrupt = 5,
};

/// Writes the synthetic benchmark into cfg.out and prints the manifest path.
int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Builds one shape model per class of cfg.manifest from its training clouds
/// into cfg.out/models/<class>.mir3, plus cfg.out/models.json.
int cmd_build(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Runs the protocol on cfg.manifest and writes metrics.csv, summary.json and,
/// in replay mode, the final shape models into cfg.out. Wall-clock times go
/// to run.log only.
int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Prints a model file's summary as JSON.
int cmd_inspect(const std::filesystem::path& model_path, std::ostream& out, std::ostream& err);

}  // namespace shapemem

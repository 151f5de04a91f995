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

#include <filesystem>
#include <string>

#include "shapemem/continual.hpp"

namespace shapemem {

struct BenchmarkConfig {
  int classes = 8;
  int train_per_class = 20;
  int test_per_class = 10;
  Eigen::Index n = 256;
  double noise_sigma = 0.01;
  std::uint64_t seed = 2026;
};

/// Everything a command needs. Serialized with sorted keys, so
/// to_json_text(from_json_text(s)) == s for any canonical s.
struct RunConfig {
  TrainConfig train;
  BenchmarkConfig bench;
  Mode mode = Mode::kReplay;
  int per_session = 2;
  bool joint_reference = true;  // also run joint training for the forgetting rate
  std::string manifest = "bench/manifest.json";
  std::string out = "out";

  /// Throws kConfig.
  void validate() const;
};

/// Canonical form: sorted keys, two-space indent, trailing newline.
std::string to_json_text(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys, wrong types and malformed
/// JSON throw kConfig.
RunConfig from_json_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace shapemem

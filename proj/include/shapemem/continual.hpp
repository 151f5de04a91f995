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

// Class-incremental training over disjoint sessions. Each session grows the
// classifier head, trains with Adam on the new classes mixed with replay of
// the old ones, then stores one shape model per new class.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapemem/data.hpp"
#include "shapemem/losses.hpp"
#include "shapemem/network.hpp"
#include "shapemem/shape_model.hpp"

namespace shapemem {

struct TaskSchedule {
  std::vector<std::vector<int>> sessions;

  /// Non-empty sessions, pairwise disjoint. Throws kEmptyClasses or
  /// kDisjointnessViolated.
  void validate() const;
  std::vector<int> all_classes() const;
};

/// Consecutive chunks of per_session classes; the last may be short.
TaskSchedule split_tasks(std::span<const int> class_ids, int per_session);

enum class Mode { kReplay, kFinetune, kJoint, kRawExemplar };

std::string mode_name(Mode m);
/// Throws kConfig for an unknown name.
Mode mode_from_name(const std::string& name);

/// Replay samples are redrawn every epoch, or once per session.
enum class ReplayRegen { kPerEpoch, kPerSession };

struct AdamConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  AdamConfig adam;
  int n_s = 10;
  double alpha = 0.2;
  int k = kDefaultModes;
  LossConfig loss;
  NetworkDims dims;
  ReplayRegen regen = ReplayRegen::kPerEpoch;
  std::uint64_t seed = 7;

  /// Throws kConfig.
  void validate() const;
};

class Adam {
 public:
  Adam(const AdamConfig& cfg, const ClassifierParams& like);
  /// params -= lr * m_hat / (sqrt(v_hat) + eps) for the given gradient.
  void step(ClassifierParams& params, const ClassifierParams& grad);

 private:
  AdamConfig cfg_;
  ClassifierParams m_;
  ClassifierParams v_;
  int t_ = 0;
};

struct Exemplar {
  Points points;
  int class_index = 0;
};

struct SessionState {
  std::optional<ClassifierParams> params;   // empty before the first session
  std::optional<ClassifierParams> teacher;  // model at the end of the previous session
  std::vector<ShapeModel> memory;           // replay mode
  std::vector<int> memory_classes;          // dataset class of each memory entry
  std::vector<Exemplar> exemplars;          // raw_exemplar mode
  std::vector<int> seen_classes;            // dataset class indices in head order
  std::vector<double> history;              // test accuracy after each session
};

/// Trains one session in place of `state` and returns the updated state.
/// Throws kDisjointnessViolated if `classes` overlaps seen classes.
SessionState run_session(SessionState state, std::span<const int> classes, const Dataset& data,
                         const TrainConfig& cfg, Mode mode);

/// Top-1 accuracy over logits restricted to the seen classes. Test labels are
/// dataset class indices. Throws kEmptySet or kUnseenLabel.
double evaluate(const ClassifierParams& params, std::span<const PointCloud> test, std::span<const int> seen_classes);

/// All test clouds of the given classes.
std::vector<PointCloud> test_set_for(const Dataset& data, std::span<const int> classes);

struct MetricsReport {
  std::vector<double> per_session_acc;
  std::vector<int> seen_counts;
  double a_avg = 0.0;
  double a_last = 0.0;
  std::optional<double> forgetting_rate;  // joint a_last - a_last
  std::int64_t memory_units = 0;
};

/// Fills a_avg / a_last from per_session_acc.
void finalize_metrics(MetricsReport& report);

struct ProtocolResult {
  MetricsReport metrics;
  SessionState state;
};

/// replay: shape-model replay, KD, focal loss and mode penalty.
/// finetune: new classes only, no memory, no KD.
/// joint: one session over every scheduled class.
/// raw_exemplar: k+1 random training clouds per class replayed verbatim.
ProtocolResult run_protocol(const Dataset& data, const TaskSchedule& schedule, const TrainConfig& cfg, Mode mode,
                            std::optional<double> joint_a_last = std::nullopt);

/// session,seen_classes,accuracy
void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace shapemem

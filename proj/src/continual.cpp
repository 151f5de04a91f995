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

#include "shapemem/continual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "shapemem/error.hpp"
#include "shapemem/rng.hpp"

namespace shapemem {

namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kSessionStreamBase = 100;

int head_index(std::span<const int> seen, int class_index) {
  const auto it = std::find(seen.begin(), seen.end(), class_index);
  if (it == seen.end()) return -1;
  return static_cast<int>(it - seen.begin());
}

}  // namespace

void TaskSchedule::validate() const {
  if (sessions.empty()) throw Error(ErrorCode::kEmptyClasses, "schedule has no sessions");
  std::set<int> seen;
  for (const auto& s : sessions) {
    if (s.empty()) throw Error(ErrorCode::kEmptyClasses, "schedule has an empty session");
    for (int c : s)
      if (!seen.insert(c).second)
        throw Error(ErrorCode::kDisjointnessViolated, "class " + std::to_string(c) + " appears in two sessions");
  }
}

std::vector<int> TaskSchedule::all_classes() const {
  std::vector<int> out;
  for (const auto& s : sessions) out.insert(out.end(), s.begin(), s.end());
  return out;
}

TaskSchedule split_tasks(std::span<const int> class_ids, int per_session) {
  if (class_ids.empty()) throw Error(ErrorCode::kEmptyClasses, "split_tasks: no classes");
  if (per_session < 1) throw Error(ErrorCode::kConfig, "split_tasks: per_session must be >= 1");
  TaskSchedule schedule;
  for (std::size_t i = 0; i < class_ids.size(); i += static_cast<std::size_t>(per_session)) {
    const std::size_t end = std::min(class_ids.size(), i + static_cast<std::size_t>(per_session));
    schedule.sessions.emplace_back(class_ids.begin() + static_cast<std::ptrdiff_t>(i),
                                   class_ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
  schedule.validate();
  return schedule;
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kReplay: return "replay";
    case Mode::kFinetune: return "finetune";
    case Mode::kJoint: return "joint";
    case Mode::kRawExemplar: return "raw_exemplar";
  }
  return "unknown";
}

Mode mode_from_name(const std::string& name) {
  for (Mode m : {Mode::kReplay, Mode::kFinetune, Mode::kJoint, Mode::kRawExemplar})
    if (mode_name(m) == name) return m;
  throw Error(ErrorCode::kConfig, "unknown mode '" + name + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    fail("adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) fail("adam epsilon must be > 0");
  if (n_s < 1) fail("n_s must be >= 1");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (k < 0 || k > kMaxModes) fail("k must lie in [0, " + std::to_string(kMaxModes) + "]");
  if (dims.h1 < 1 || dims.h2 < 1 || dims.h3 < 1) fail("network widths must be >= 1");
  loss.validate();
}

Adam::Adam(const AdamConfig& cfg, const ClassifierParams& like)
    : cfg_(cfg), m_(ClassifierParams::zeros_like(like)), v_(ClassifierParams::zeros_like(like)) {}

void Adam::step(ClassifierParams& params, const ClassifierParams& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  };
  update(params.w1, m_.w1, v_.w1, grad.w1);
  update(params.b1, m_.b1, v_.b1, grad.b1);
  update(params.w2, m_.w2, v_.w2, grad.w2);
  update(params.b2, m_.b2, v_.b2, grad.b2);
  update(params.w3, m_.w3, v_.w3, grad.w3);
  update(params.b3, m_.b3, v_.b3, grad.b3);
  update(params.w4, m_.w4, v_.w4, grad.w4);
  update(params.b4, m_.b4, v_.b4, grad.b4);
}

SessionState run_session(SessionState state, std::span<const int> classes, const Dataset& data,
                         const TrainConfig& cfg, Mode mode) {
  cfg.validate();
  if (classes.empty()) throw Error(ErrorCode::kEmptyClasses, "run_session: no classes");
  for (int c : classes) {
    if (c < 0 || c >= static_cast<int>(data.class_ids.size()))
      throw Error(ErrorCode::kBadLabel, "run_session: class " + std::to_string(c) + " not in dataset");
    if (head_index(state.seen_classes, c) >= 0)
      throw Error(ErrorCode::kDisjointnessViolated, "class '" + data.class_ids[static_cast<std::size_t>(c)] +
                                                        "' was already learned");
  }

  const std::uint64_t model_seed = mix_seed(cfg.seed, kModelStream);
  const auto session_index = static_cast<std::uint64_t>(state.history.size());
  Rng rng(mix_seed(cfg.seed, kSessionStreamBase + session_index));

  if (state.params) state.teacher = *state.params;
  const bool use_teacher = state.teacher && (mode == Mode::kReplay || mode == Mode::kRawExemplar);

  std::vector<int> head = state.seen_classes;
  head.insert(head.end(), classes.begin(), classes.end());
  const int total = static_cast<int>(head.size());
  ClassifierParams params =
      state.params ? expand_head(*state.params, total, model_seed) : init_params(cfg.dims, total, model_seed);

  std::vector<LabeledCloud> fresh;
  for (int c : classes)
    for (const auto& pc : data.train[static_cast<std::size_t>(c)]) fresh.push_back({&pc.points, head_index(head, c)});

  std::vector<ReplayItem> replay;
  auto draw_replay = [&]() {
    replay.clear();
    if (mode == Mode::kReplay) {
      for (std::size_t i = 0; i < state.memory.size(); ++i) {
        const ShapeModel& model = state.memory[i];
        const int label = head_index(head, state.memory_classes[i]);
        for (auto& s : generate_replay_batch(model, cfg.n_s, cfg.alpha, rng.next_u64()))
          replay.push_back({std::move(s.points), label, &model.modes});
      }
    } else if (mode == Mode::kRawExemplar) {
      for (const auto& e : state.exemplars) replay.push_back({e.points, head_index(head, e.class_index), nullptr});
    }
  };

  Adam adam(cfg.adam, params);
  const ClassifierParams* teacher = use_teacher ? &*state.teacher : nullptr;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches = (fresh.size() + bs - 1) / bs;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(fresh);
    if (epoch == 0 || cfg.regen == ReplayRegen::kPerEpoch) draw_replay();
    rng.shuffle(replay);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * bs;
      const std::size_t hi = std::min(fresh.size(), lo + bs);
      // replay is spread over the epoch's new-data batches in equal shares
      const std::size_t r_lo = b * replay.size() / batches;
      const std::size_t r_hi = (b + 1) * replay.size() / batches;
      TotalLoss loss = total_loss(params, teacher, std::span(fresh).subspan(lo, hi - lo),
                                  std::span(replay).subspan(r_lo, r_hi - r_lo), cfg.loss);
      loss.d_params *= 1.0 / static_cast<double>(loss.samples);
      adam.step(params, loss.d_params);
    }
  }
  if (!params.all_finite()) throw Error(ErrorCode::kNonFinite, "parameters diverged");

  if (mode == Mode::kReplay) {
    for (int c : classes) {
      const auto& clouds = data.train[static_cast<std::size_t>(c)];
      const CorrespondedSet set = make_corresponded_set(data.class_ids[static_cast<std::size_t>(c)], clouds);
      state.memory.push_back(build_shape_model(set, cfg.k));
      state.memory_classes.push_back(c);
    }
  } else if (mode == Mode::kRawExemplar) {
    for (int c : classes) {
      const auto& clouds = data.train[static_cast<std::size_t>(c)];
      std::vector<std::size_t> idx(clouds.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      rng.shuffle(idx);
      const std::size_t keep = std::min(idx.size(), static_cast<std::size_t>(cfg.k + 1));
      for (std::size_t i = 0; i < keep; ++i) state.exemplars.push_back({clouds[idx[i]].points, c});
    }
  }

  state.params = std::move(params);
  state.seen_classes = std::move(head);
  return state;
}

std::vector<PointCloud> test_set_for(const Dataset& data, std::span<const int> classes) {
  std::vector<PointCloud> out;
  for (int c : classes) {
    const auto& test = data.test.at(static_cast<std::size_t>(c));
    out.insert(out.end(), test.begin(), test.end());
  }
  return out;
}

double evaluate(const ClassifierParams& params, std::span<const PointCloud> test, std::span<const int> seen_classes) {
  if (test.empty()) throw Error(ErrorCode::kEmptySet, "evaluate: empty test set");
  const auto seen = static_cast<Eigen::Index>(seen_classes.size());
  if (seen < 1 || seen > params.classes())
    throw Error(ErrorCode::kDimensionMismatch, "evaluate: seen classes do not fit the head");
  std::size_t correct = 0;
  for (const auto& pc : test) {
    const int want = pc.label ? head_index(seen_classes, *pc.label) : -1;
    if (want < 0) throw Error(ErrorCode::kUnseenLabel, "evaluate: test sample of an unseen class");
    const ForwardRecord rec = forward(params, pc.points);
    Eigen::Index pred = 0;
    rec.logits.head(seen).maxCoeff(&pred);
    if (pred == want) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void finalize_metrics(MetricsReport& report) {
  if (report.per_session_acc.empty()) throw Error(ErrorCode::kEmptySet, "no session accuracies");
  report.a_avg = std::accumulate(report.per_session_acc.begin(), report.per_session_acc.end(), 0.0) /
                 static_cast<double>(report.per_session_acc.size());
  report.a_last = report.per_session_acc.back();
}

ProtocolResult run_protocol(const Dataset& data, const TaskSchedule& schedule, const TrainConfig& cfg, Mode mode,
                            std::optional<double> joint_a_last) {
  schedule.validate();
  cfg.validate();
  ProtocolResult result;
  MetricsReport& report = result.metrics;
  SessionState& state = result.state;

  std::vector<std::vector<int>> sessions = schedule.sessions;
  if (mode == Mode::kJoint) sessions = {schedule.all_classes()};

  for (const auto& classes : sessions) {
    state = run_session(std::move(state), classes, data, cfg, mode);
    const auto test = test_set_for(data, state.seen_classes);
    const double acc = evaluate(*state.params, test, state.seen_classes);
    state.history.push_back(acc);
    report.per_session_acc.push_back(acc);
    report.seen_counts.push_back(static_cast<int>(state.seen_classes.size()));
  }
  finalize_metrics(report);
  if (joint_a_last) report.forgetting_rate = *joint_a_last - report.a_last;
  if (mode == Mode::kReplay) {
    report.memory_units = memory_footprint(state.memory).units;
  } else if (mode == Mode::kRawExemplar) {
    report.memory_units = static_cast<std::int64_t>(state.exemplars.size());
  }
  return result;
}

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out << "session,seen_classes,accuracy\n";
  char buf[64];
  for (std::size_t i = 0; i < report.per_session_acc.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", report.per_session_acc[i]);
    out << (i + 1) << ',' << report.seen_counts[i] << ',' << buf << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace shapemem

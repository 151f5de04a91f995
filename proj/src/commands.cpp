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

#include "shapemem/commands.hpp"

#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <span>

#include <json.hpp>

#include "shapemem/error.hpp"

namespace shapemem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFinite:
      return kExitNumeric;
    case ErrorCode::kIoFailure:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kParseError:
    case ErrorCode::kBadSpec:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kEmptySet:
    case ErrorCode::kEmptyTarget:
      return kExitIo;
    default:
      return kExitConfig;
  }
}

template <typename F>
int guarded(std::ostream& err, const char* command, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "shapemem " << command << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "shapemem " << command << ": " << e.what() << "\n";
    return kExitIo;
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

// Class ids become file names.
std::string file_stem(const std::string& class_id) {
  std::string s = class_id;
  for (char& ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  return s.empty() ? "_" : s;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json model_summary(const ShapeModel& model) {
  const ShapeModel one[] = {model};
  const MemoryFootprint fp = memory_footprint(one);
  return {{"class_id", model.class_id},
          {"n", static_cast<std::int64_t>(model.n())},
          {"k", model.k()},
          {"sigmas", model.sigmas},
          {"orthonormality_residual", orthonormality_residual(model)},
          {"units", fp.units},
          {"floats", fp.floats}};
}

// Writes <dir>/models/<class>.mir3 for each model; returns the index object.
json save_models(std::span<const ShapeModel> models, const fs::path& dir) {
  make_dir(dir / "models");
  json entries = json::array();
  for (const auto& m : models) {
    const std::string rel = "models/" + file_stem(m.class_id) + ".mir3";
    save_model(m, dir / rel);
    json e = model_summary(m);
    e["path"] = rel;
    entries.push_back(std::move(e));
  }
  const MemoryFootprint fp = memory_footprint(models);
  return {{"models", entries}, {"units", fp.units}, {"floats", fp.floats}};
}

}  // namespace

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, "bench", [&] {
    cfg.validate();
    const Benchmark bench = build_benchmark(cfg.bench.classes, cfg.bench.train_per_class, cfg.bench.test_per_class,
                                            cfg.bench.n, cfg.bench.seed, cfg.bench.noise_sigma);
    out << write_benchmark(bench, cfg.out).string() << "\n";
    return kExitOk;
  });
}

int cmd_build(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, "build", [&] {
    cfg.validate();
    const Dataset data = load_dataset(cfg.manifest);
    std::vector<ShapeModel> models;
    for (std::size_t c = 0; c < data.class_ids.size(); ++c)
      models.push_back(build_shape_model(make_corresponded_set(data.class_ids[c], data.train[c]), cfg.train.k));
    make_dir(cfg.out);
    const fs::path index = fs::path(cfg.out) / "models.json";
    write_text(index, save_models(models, cfg.out).dump(2) + "\n");
    out << index.string() << "\n";
    return kExitOk;
  });
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, "train", [&] {
    cfg.validate();
    const Dataset data = load_dataset(cfg.manifest);
    make_dir(cfg.out);
    const fs::path dir = cfg.out;
    std::ofstream log(dir / "run.log", std::ios::app);
    if (!log) throw Error(ErrorCode::kIoFailure, "cannot open " + (dir / "run.log").string());
    log << timestamp() << " start mode=" << mode_name(cfg.mode) << " seed=" << cfg.train.seed << "\n";

    std::vector<int> ids(data.class_ids.size());
    std::iota(ids.begin(), ids.end(), 0);
    const TaskSchedule schedule = split_tasks(ids, cfg.per_session);

    std::optional<double> joint;
    if (cfg.joint_reference && cfg.mode != Mode::kJoint) {
      joint = run_protocol(data, schedule, cfg.train, Mode::kJoint).metrics.a_last;
      log << timestamp() << " joint reference a_last=" << *joint << "\n";
    }
    ProtocolResult result = run_protocol(data, schedule, cfg.train, cfg.mode, joint);
    MetricsReport& m = result.metrics;
    if (cfg.joint_reference && cfg.mode == Mode::kJoint) m.forgetting_rate = 0.0;

    write_metrics_csv(m, dir / "metrics.csv");
    json summary = {{"a_avg", m.a_avg},
                    {"a_last", m.a_last},
                    {"forgetting_rate", m.forgetting_rate ? json(*m.forgetting_rate) : json(nullptr)},
                    {"memory_units", m.memory_units},
                    {"per_session_acc", m.per_session_acc},
                    {"config", json::parse(to_json_text(cfg))}};
    if (cfg.mode == Mode::kReplay) {
      const json index = save_models(result.state.memory, dir);
      write_text(dir / "models.json", index.dump(2) + "\n");
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    log << timestamp() << " done a_last=" << m.a_last << "\n";
    out << (dir / "summary.json").string() << "\n";
    return kExitOk;
  });
}

int cmd_inspect(const fs::path& model_path, std::ostream& out, std::ostream& err) {
  try {
    out << model_summary(load_model(model_path)).dump(2) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "shapemem inspect: " << e.what() << "\n";
    return e.code() == ErrorCode::kIoFailure ? kExitIo : kExitCorrupt;
  }
}

}  // namespace shapemem

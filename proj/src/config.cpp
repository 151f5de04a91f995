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

#include "shapemem/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shapemem/error.hpp"

namespace shapemem {

namespace {

using nlohmann::json;

// Reads fields out of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorCode::kConfig, where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw Error(ErrorCode::kConfig, "");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw Error(ErrorCode::kConfig, "");
        if constexpr (std::is_unsigned_v<T>)
          if (!it->is_number_unsigned()) throw Error(ErrorCode::kConfig, "");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw Error(ErrorCode::kConfig, "");
      } else {
        if (!it->is_string()) throw Error(ErrorCode::kConfig, "");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, where_ + "." + key + " has the wrong type");
    }
  }

  const json& child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? empty_ : *it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw Error(ErrorCode::kConfig, "unknown key " + where_ + "." + key);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
  const json empty_ = json::object();
};

std::string regen_name(ReplayRegen r) { return r == ReplayRegen::kPerEpoch ? "per_epoch" : "per_session"; }

ReplayRegen regen_from_name(const std::string& s) {
  if (s == "per_epoch") return ReplayRegen::kPerEpoch;
  if (s == "per_session") return ReplayRegen::kPerSession;
  throw Error(ErrorCode::kConfig, "unknown replay_regen '" + s + "'");
}

std::string gmr_name(GmrGradient g) { return g == GmrGradient::kExact ? "exact" : "finite_difference"; }

GmrGradient gmr_from_name(const std::string& s) {
  if (s == "exact") return GmrGradient::kExact;
  if (s == "finite_difference") return GmrGradient::kFiniteDifference;
  throw Error(ErrorCode::kConfig, "unknown gmr_gradient '" + s + "'");
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  json j;
  j["adam"] = {{"beta1", t.adam.beta1},
               {"beta2", t.adam.beta2},
               {"epsilon", t.adam.epsilon},
               {"learning_rate", t.adam.learning_rate}};
  j["alpha"] = t.alpha;
  j["batch_size"] = t.batch_size;
  j["benchmark"] = {{"classes", c.bench.classes},
                    {"n", static_cast<std::int64_t>(c.bench.n)},
                    {"noise_sigma", c.bench.noise_sigma},
                    {"seed", c.bench.seed},
                    {"test_per_class", c.bench.test_per_class},
                    {"train_per_class", c.bench.train_per_class}};
  j["epochs"] = t.epochs;
  j["joint_reference"] = c.joint_reference;
  j["k"] = t.k;
  j["loss"] = {{"alpha_t", t.loss.alpha_t},       {"fd_step", t.loss.fd_step},
               {"gamma", t.loss.gamma},           {"gmr_gradient", gmr_name(t.loss.gmr_gradient)},
               {"kd_factor", t.loss.kd_factor},   {"lambda", t.loss.lambda},
               {"temperature", t.loss.temperature}};
  j["manifest"] = c.manifest;
  j["mode"] = mode_name(c.mode);
  j["n_s"] = t.n_s;
  j["network"] = {{"h1", t.dims.h1}, {"h2", t.dims.h2}, {"h3", t.dims.h3}};
  j["out"] = c.out;
  j["per_session"] = c.per_session;
  j["replay_regen"] = regen_name(t.regen);
  j["seed"] = t.seed;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (bench.classes < 1 || bench.classes > kMaxSynthClasses)
    throw Error(ErrorCode::kConfig, "benchmark.classes must lie in [1, " + std::to_string(kMaxSynthClasses) + "]");
  if (bench.train_per_class < 2) throw Error(ErrorCode::kConfig, "benchmark.train_per_class must be >= 2");
  if (bench.test_per_class < 1) throw Error(ErrorCode::kConfig, "benchmark.test_per_class must be >= 1");
  if (bench.n < 8) throw Error(ErrorCode::kConfig, "benchmark.n must be >= 8");
  if (!(bench.noise_sigma >= 0.0)) throw Error(ErrorCode::kConfig, "benchmark.noise_sigma must be >= 0");
  if (per_session < 1) throw Error(ErrorCode::kConfig, "per_session must be >= 1");
  if (out.empty()) throw Error(ErrorCode::kConfig, "out must not be empty");
}

std::string to_json_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  TrainConfig& t = c.train;
  ObjectReader root(j, "config");
  {
    ObjectReader r(root.child("adam"), "adam");
    r.get("beta1", t.adam.beta1);
    r.get("beta2", t.adam.beta2);
    r.get("epsilon", t.adam.epsilon);
    r.get("learning_rate", t.adam.learning_rate);
    r.finish();
  }
  root.get("alpha", t.alpha);
  root.get("batch_size", t.batch_size);
  {
    ObjectReader r(root.child("benchmark"), "benchmark");
    std::int64_t n = c.bench.n;
    r.get("classes", c.bench.classes);
    r.get("n", n);
    r.get("noise_sigma", c.bench.noise_sigma);
    r.get("seed", c.bench.seed);
    r.get("test_per_class", c.bench.test_per_class);
    r.get("train_per_class", c.bench.train_per_class);
    r.finish();
    c.bench.n = static_cast<Eigen::Index>(n);
  }
  root.get("epochs", t.epochs);
  root.get("joint_reference", c.joint_reference);
  root.get("k", t.k);
  {
    ObjectReader r(root.child("loss"), "loss");
    std::string gmr = gmr_name(t.loss.gmr_gradient);
    r.get("alpha_t", t.loss.alpha_t);
    r.get("fd_step", t.loss.fd_step);
    r.get("gamma", t.loss.gamma);
    r.get("gmr_gradient", gmr);
    r.get("kd_factor", t.loss.kd_factor);
    r.get("lambda", t.loss.lambda);
    r.get("temperature", t.loss.temperature);
    r.finish();
    t.loss.gmr_gradient = gmr_from_name(gmr);
  }
  root.get("manifest", c.manifest);
  std::string mode = mode_name(c.mode);
  root.get("mode", mode);
  try {
    c.mode = mode_from_name(mode);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  root.get("n_s", t.n_s);
  {
    ObjectReader r(root.child("network"), "network");
    r.get("h1", t.dims.h1);
    r.get("h2", t.dims.h2);
    r.get("h3", t.dims.h3);
    r.finish();
  }
  root.get("out", c.out);
  root.get("per_session", c.per_session);
  std::string regen = regen_name(t.regen);
  root.get("replay_regen", regen);
  t.regen = regen_from_name(regen);
  root.get("seed", t.seed);
  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

}  // namespace shapemem

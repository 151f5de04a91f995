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

#include "shapemem/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shapemem/binary_io.hpp"
#include "shapemem/error.hpp"
#include "shapemem/rng.hpp"

namespace shapemem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInvGolden = 0.6180339887498948482;

// Sweep position of point i: base index, and whether it is the antipode of
// that base point. For even n, point i + n/2 mirrors point i through the
// origin; for odd n the last point sits on the equator.
struct SweepSlot {
  Eigen::Index base = 0;
  Eigen::Index half = 1;
  bool mirrored = false;
  bool equator = false;
};

SweepSlot sweep_slot(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index half = n / 2;
  if (i >= 2 * half) return {0, half, false, true};
  return {i % half, half, i >= half, false};
}

// Fibonacci sweep of the upper hemisphere over `half` points, then mirrored.
Eigen::Vector3d sweep_direction(const SweepSlot& s) {
  if (s.equator) return {1.0, 0.0, 0.0};
  const double z = 1.0 - (static_cast<double>(s.base) + 0.5) / static_cast<double>(s.half);
  const double azimuth = 2.0 * std::numbers::pi * std::fmod(static_cast<double>(s.base) * kInvGolden, 1.0);
  const double r = std::sqrt(1.0 - z * z);
  const Eigen::Vector3d d(r * std::cos(azimuth), r * std::sin(azimuth), z);
  return s.mirrored ? Eigen::Vector3d(-d) : d;
}

// Boundary point of a convex body along unit direction d from an interior
// center, or the torus point at the same parametric coordinate.
Eigen::Vector3d surface_point(Family family, double a, double b, double c, Eigen::Index i, Eigen::Index n) {
  const SweepSlot slot = sweep_slot(i, n);
  const Eigen::Vector3d d = sweep_direction(slot);
  const double rho = std::hypot(d.x(), d.y());
  double gauge = 1.0;
  switch (family) {
    case Family::kSphere:
      gauge = 1.0 / a;
      break;
    case Family::kEllipsoid:
      gauge = std::sqrt(std::pow(d.x() / a, 2) + std::pow(d.y() / b, 2) + std::pow(d.z() / c, 2));
      break;
    case Family::kBox:
      gauge = std::max({std::abs(d.x()) / a, std::abs(d.y()) / b, std::abs(d.z()) / c});
      break;
    case Family::kCylinder:
      gauge = std::max(rho / a, std::abs(d.z()) / b);
      break;
    case Family::kCone: {
      // base disk at z = -b/2, apex at z = +b/2
      const double half = b / 2.0;
      gauge = std::max(-d.z() / half, (rho * b / a + d.z()) / half);
      break;
    }
    case Family::kPyramid: {
      const double half = b / 2.0;
      gauge = std::max({-d.z() / half, (std::abs(d.x()) * b / a + d.z()) / half,
                        (std::abs(d.y()) * b / a + d.z()) / half});
      break;
    }
    case Family::kCapsule: {
      // |t d - segment| = a, segment from (0,0,-b) to (0,0,b)
      const double dz = std::abs(d.z());
      double t = rho > 0.0 ? a / rho : std::numeric_limits<double>::infinity();
      if (dz * t > b) t = dz * b + std::sqrt(dz * dz * b * b - b * b + a * a);
      return t * d;
    }
    case Family::kTorus: {
      // the torus is centrally symmetric, so mirrored slots negate the point
      if (slot.equator) return {a + b, 0.0, 0.0};
      const double u = (static_cast<double>(slot.base) + 0.5) / static_cast<double>(slot.half);
      const double around = 2.0 * std::numbers::pi * std::fmod(static_cast<double>(slot.base) * kInvGolden, 1.0);
      const double tube = 2.0 * std::numbers::pi * u;
      const double ring = a + b * std::cos(tube);
      const Eigen::Vector3d p(ring * std::cos(around), ring * std::sin(around), b * std::sin(tube));
      return slot.mirrored ? Eigen::Vector3d(-p) : p;
    }
  }
  return d / gauge;
}

[[noreturn]] void parse_error(const fs::path& path, int line, const std::string& what) {
  throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

json spec_to_json(const SynthClassSpec& spec) {
  json params = json::array();
  for (const auto& r : spec.params) params.push_back({r.lo, r.hi});
  return {{"family", family_name(spec.family)}, {"params", params}, {"noise_sigma", spec.noise_sigma}};
}

SynthClassSpec spec_from_json(const json& j, int count) {
  SynthClassSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  const auto& params = j.at("params");
  if (!params.is_array() || params.size() != 3) throw Error(ErrorCode::kBadSpec, "spec.params must hold 3 ranges");
  for (std::size_t i = 0; i < 3; ++i) spec.params[i] = {params[i].at(0).get<double>(), params[i].at(1).get<double>()};
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  spec.count = count;
  return spec;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::kSphere: return "sphere";
    case Family::kEllipsoid: return "ellipsoid";
    case Family::kBox: return "box";
    case Family::kCylinder: return "cylinder";
    case Family::kCone: return "cone";
    case Family::kTorus: return "torus";
    case Family::kPyramid: return "pyramid";
    case Family::kCapsule: return "capsule";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  for (Family f : kAllFamilies)
    if (family_name(f) == name) return f;
  throw Error(ErrorCode::kBadSpec, "unknown shape family '" + name + "'");
}

void SynthClassSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kBadSpec, what); };
  for (const auto& r : params)
    if (!(r.lo > 0.0) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) fail("parameter ranges must satisfy 0 < lo <= hi");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
  if (count < 1) fail("count must be >= 1");
  if (family == Family::kTorus && !(params[1].hi < params[0].lo)) fail("torus minor radius must stay below major");
}

SynthClassSpec default_spec(Family family, int count, double noise_sigma) {
  SynthClassSpec s;
  s.family = family;
  s.count = count;
  s.noise_sigma = noise_sigma;
  switch (family) {
    case Family::kSphere: s.params = {{{0.8, 1.2}, {1.0, 1.0}, {1.0, 1.0}}}; break;
    case Family::kEllipsoid: s.params = {{{1.0, 1.3}, {0.6, 0.9}, {0.35, 0.55}}}; break;
    case Family::kBox: s.params = {{{0.9, 1.2}, {0.5, 0.9}, {0.3, 0.6}}}; break;
    case Family::kCylinder: s.params = {{{0.35, 0.55}, {0.8, 1.2}, {1.0, 1.0}}}; break;
    case Family::kCone: s.params = {{{0.5, 0.8}, {1.2, 1.8}, {1.0, 1.0}}}; break;
    case Family::kTorus: s.params = {{{0.8, 1.0}, {0.2, 0.35}, {1.0, 1.0}}}; break;
    case Family::kPyramid: s.params = {{{0.6, 0.9}, {0.9, 1.4}, {1.0, 1.0}}}; break;
    case Family::kCapsule: s.params = {{{0.25, 0.4}, {0.6, 0.9}, {1.0, 1.0}}}; break;
  }
  return s;
}

std::vector<PointCloud> synth_generate(const SynthClassSpec& spec, Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 8) throw Error(ErrorCode::kBadSpec, "synth_generate: n must be >= 8");
  Rng rng(seed);
  std::vector<PointCloud> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int s = 0; s < spec.count; ++s) {
    const double a = rng.uniform(spec.params[0].lo, spec.params[0].hi);
    const double b = rng.uniform(spec.params[1].lo, spec.params[1].hi);
    const double c = rng.uniform(spec.params[2].lo, spec.params[2].hi);
    PointCloud pc{Points(n, 3), std::nullopt};
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Vector3d p = surface_point(spec.family, a, b, c, i, n);
      if (spec.noise_sigma > 0.0)
        for (int k = 0; k < 3; ++k) p(k) += spec.noise_sigma * rng.normal();
      pc.points.row(i) = p.transpose();
    }
    out.push_back(normalize(pc));
  }
  return out;
}

PointCloud read_off(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());

  std::string line;
  int line_no = 0;
  auto next_content = [&](std::string& out) {
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      out = line.substr(first);
      return true;
    }
    return false;
  };

  std::string content;
  if (!next_content(content)) parse_error(path, line_no, "empty file");
  if (content.rfind("OFF", 0) != 0) parse_error(path, line_no, "missing OFF tag");
  std::string counts_text = content.substr(3);
  if (split_ws(counts_text).empty()) {
    if (!next_content(counts_text)) parse_error(path, line_no, "missing counts line");
  }
  const auto counts = split_ws(counts_text);
  long long nv = -1, nf = -1;
  if (counts.size() < 2 || counts.size() > 3 || !parse_number(counts[0], nv) || !parse_number(counts[1], nf) ||
      nv < 1 || nf < 0)
    parse_error(path, line_no, "malformed counts '" + counts_text + "'");
  if (counts.size() == 3) {
    long long ne = -1;
    if (!parse_number(counts[2], ne) || ne < 0) parse_error(path, line_no, "malformed edge count");
  }

  PointCloud pc{Points(nv, 3), std::nullopt};
  for (long long v = 0; v < nv; ++v) {
    if (!next_content(content))
      parse_error(path, line_no, "expected " + std::to_string(nv) + " vertices, found " + std::to_string(v));
    const auto tokens = split_ws(content);
    if (tokens.size() < 3) parse_error(path, line_no, "vertex line needs 3 coordinates");
    for (int k = 0; k < 3; ++k) {
      double x = 0.0;
      if (!parse_number(tokens[static_cast<std::size_t>(k)], x) || !std::isfinite(x))
        parse_error(path, line_no, "bad coordinate '" + std::string(tokens[static_cast<std::size_t>(k)]) + "'");
      pc.points(v, k) = x;
    }
  }
  return pc;
}

void write_off(const PointCloud& pc, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out << "OFF\n" << pc.size() << " 0 0\n";
  char buf[96];
  for (Eigen::Index i = 0; i < pc.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", pc.points(i, 0), pc.points(i, 1), pc.points(i, 2));
    out << buf;
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

void save_clouds(const std::vector<PointCloud>& clouds, const fs::path& path) {
  const Eigen::Index n = clouds.empty() ? 0 : clouds.front().size();
  binio::Writer w;
  w.magic("MIRP");
  w.u32(kCloudCacheVersion);
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(clouds.size()));
  for (const auto& pc : clouds) {
    if (pc.size() != n) throw Error(ErrorCode::kDimensionMismatch, "save_clouds: ragged clouds");
    w.f64s({pc.points.data(), static_cast<std::size_t>(pc.points.size())});
  }
  w.write_file(path);
}

std::vector<PointCloud> load_clouds(const fs::path& path) {
  auto r = binio::Reader::from_file(path);
  if (!r.expect_magic("MIRP")) throw Error(ErrorCode::kBadMagic, path.string() + " is not a MIRP file");
  const std::uint32_t version = r.u32();
  if (version != kCloudCacheVersion)
    throw Error(ErrorCode::kVersionMismatch, "MIRP version " + std::to_string(version) + " unsupported");
  const std::uint32_t n = r.u32();
  const std::uint32_t count = r.u32();
  if (r.remaining() != std::size_t{count} * n * 3 * 8) throw Error(ErrorCode::kBadMagic, "MIRP payload size mismatch");
  std::vector<PointCloud> clouds(count);
  for (auto& pc : clouds) {
    pc.points.resize(n, 3);
    r.f64s({pc.points.data(), static_cast<std::size_t>(pc.points.size())});
  }
  return clouds;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  if (classes.empty()) throw Error(ErrorCode::kBadSpec, "manifest lists no classes");
  for (const auto& c : classes) {
    if (!ids.insert(c.class_id).second) throw Error(ErrorCode::kBadSpec, "duplicate class id '" + c.class_id + "'");
    if (c.train_count < 2 || c.test_count < 1)
      throw Error(ErrorCode::kBadSpec, "class '" + c.class_id + "' needs >= 2 train and >= 1 test samples");
  }
}

Benchmark build_benchmark(int n_classes, int per_class_train, int per_class_test, Eigen::Index n, std::uint64_t seed,
                          double noise_sigma) {
  if (n_classes > kMaxSynthClasses)
    throw Error(ErrorCode::kTooManyClasses,
                std::to_string(n_classes) + " classes requested, " + std::to_string(kMaxSynthClasses) + " families");
  if (n_classes < 1 || per_class_train < 1 || per_class_test < 1)
    throw Error(ErrorCode::kBadSpec, "build_benchmark: counts must be >= 1");

  Benchmark b;
  b.manifest.provenance = Provenance::kSynthetic;
  b.manifest.n = n;
  b.manifest.seed = seed;
  b.data.n = n;
  for (int c = 0; c < n_classes; ++c) {
    const Family family = kAllFamilies[static_cast<std::size_t>(c)];
    const std::string id = family_name(family);
    SynthClassSpec train_spec = default_spec(family, per_class_train, noise_sigma);
    SynthClassSpec test_spec = train_spec;
    test_spec.count = per_class_test;

    auto train = synth_generate(train_spec, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(c)));
    auto test = synth_generate(test_spec, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(c) + 1));
    for (auto& pc : train) pc.label = c;
    for (auto& pc : test) pc.label = c;

    b.manifest.classes.push_back(
        {id, train_spec, {id + "_train.mirp"}, {id + "_test.mirp"}, per_class_train, per_class_test});
    b.data.class_ids.push_back(id);
    b.data.train.push_back(std::move(train));
    b.data.test.push_back(std::move(test));
  }
  b.manifest.validate();
  return b;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json classes = json::array();
  for (const auto& c : manifest.classes) {
    json entry = {{"class_id", c.class_id},
                  {"train", c.train},
                  {"test", c.test},
                  {"train_count", c.train_count},
                  {"test_count", c.test_count}};
    if (c.spec) entry["spec"] = spec_to_json(*c.spec);
    classes.push_back(std::move(entry));
  }
  const json j = {{"provenance", manifest.provenance == Provenance::kSynthetic ? "synthetic" : "off_files"},
                  {"n", manifest.n},
                  {"seed", manifest.seed},
                  {"classes", classes}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open manifest " + path.string());
  DatasetManifest m;
  try {
    const json j = json::parse(in);
    const auto prov = j.at("provenance").get<std::string>();
    if (prov == "synthetic") {
      m.provenance = Provenance::kSynthetic;
    } else if (prov == "off_files") {
      m.provenance = Provenance::kOffFiles;
    } else {
      throw Error(ErrorCode::kBadSpec, "unknown provenance '" + prov + "'");
    }
    m.n = j.at("n").get<Eigen::Index>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.at("classes")) {
      ManifestClass mc;
      mc.class_id = c.at("class_id").get<std::string>();
      mc.train = c.at("train").get<std::vector<std::string>>();
      mc.test = c.at("test").get<std::vector<std::string>>();
      mc.train_count = c.value("train_count", static_cast<int>(mc.train.size()));
      mc.test_count = c.value("test_count", static_cast<int>(mc.test.size()));
      if (c.contains("spec")) mc.spec = spec_from_json(c.at("spec"), mc.train_count);
      m.classes.push_back(std::move(mc));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadSpec, "manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

fs::path write_benchmark(const Benchmark& bench, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t c = 0; c < bench.manifest.classes.size(); ++c) {
    const auto& mc = bench.manifest.classes[c];
    save_clouds(bench.data.train[c], dir / mc.train.front());
    save_clouds(bench.data.test[c], dir / mc.test.front());
  }
  const fs::path manifest_path = dir / "manifest.json";
  save_manifest(bench.manifest, manifest_path);
  return manifest_path;
}

Dataset load_dataset(const fs::path& manifest_path) {
  const DatasetManifest m = load_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  Dataset d;
  d.n = m.n;

  auto load_split = [&](const std::vector<std::string>& files, int label) {
    std::vector<PointCloud> clouds;
    for (const auto& f : files) {
      const fs::path p = base / f;
      if (m.provenance == Provenance::kSynthetic) {
        for (auto& pc : load_clouds(p)) {
          if (pc.size() != m.n) throw Error(ErrorCode::kDimensionMismatch, p.string() + ": wrong point count");
          clouds.push_back(std::move(pc));
        }
      } else {
        clouds.push_back(normalize(farthest_point_sample(normalize(read_off(p)), m.n)));
      }
    }
    for (auto& pc : clouds) pc.label = label;
    return clouds;
  };

  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const auto& mc = m.classes[c];
    d.class_ids.push_back(mc.class_id);
    d.train.push_back(load_split(mc.train, static_cast<int>(c)));
    d.test.push_back(load_split(mc.test, static_cast<int>(c)));
    if (d.train.back().size() < 2 || d.test.back().empty())
      throw Error(ErrorCode::kBadSpec, "class '" + mc.class_id + "' needs >= 2 train and >= 1 test samples");
  }
  return d;
}

}  // namespace shapemem

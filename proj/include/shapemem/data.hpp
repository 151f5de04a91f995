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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shapemem/geometry.hpp"

namespace shapemem {

enum class Family { kSphere, kEllipsoid, kBox, kCylinder, kCone, kTorus, kPyramid, kCapsule };

inline constexpr std::array<Family, 8> kAllFamilies = {Family::kSphere,  Family::kEllipsoid, Family::kBox,
                                                       Family::kCylinder, Family::kCone,     Family::kTorus,
                                                       Family::kPyramid,  Family::kCapsule};

std::string family_name(Family f);
/// Throws kBadSpec for an unknown name.
Family family_from_name(const std::string& name);

struct Range {
  double lo = 1.0;
  double hi = 1.0;
};

/// Shape parameters a, b, c mean, per family:
///   sphere    a radius
///   ellipsoid a, b, c semi-axes
///   box       a, b, c half extents
///   cylinder  a radius, b half height
///   cone      a base radius, b height
///   torus     a major radius, b minor radius (b.hi < a.lo)
///   pyramid   a base half side, b height
///   capsule   a radius, b half length of the core segment
struct SynthClassSpec {
  Family family = Family::kSphere;
  std::array<Range, 3> params{};
  double noise_sigma = 0.0;
  int count = 1;

  /// Throws kBadSpec.
  void validate() const;
};

/// The family's default parameter ranges used by build_benchmark.
SynthClassSpec default_spec(Family family, int count, double noise_sigma = 0.01);

/// Point i of every sample sits at the same sweep coordinate, so samples of
/// one family are in correspondence before noise. The first n/2 points sweep
/// the upper hemisphere (z_j = 1 - (j + 1/2)/(n/2), azimuth 2 pi frac(j / phi))
/// and point j + n/2 takes the opposite direction; an odd n adds one
/// equatorial point. Centrally symmetric families therefore have their
/// centroid at the origin for even n. Each sample draws a, b, c uniformly,
/// then per-point isotropic noise, then is normalized. Requires n >= 8.
std::vector<PointCloud> synth_generate(const SynthClassSpec& spec, Eigen::Index n, std::uint64_t seed);

/// Throws kIoFailure or kParseError (message carries the line number).
/// Accepts "OFF" alone on the first line or fused with the counts
/// ("OFF490 1028 0"); '#' comments and blank lines are skipped; faces are
/// ignored.
PointCloud read_off(const std::filesystem::path& path);
/// Vertices only, 17 significant digits.
void write_off(const PointCloud& pc, const std::filesystem::path& path);

// "MIRP" cloud cache: magic, u32 version, u32 n, u32 count, then count * n * 3
// little-endian f64 in row-major order.
constexpr std::uint32_t kCloudCacheVersion = 1;
void save_clouds(const std::vector<PointCloud>& clouds, const std::filesystem::path& path);
std::vector<PointCloud> load_clouds(const std::filesystem::path& path);

enum class Provenance { kSynthetic, kOffFiles };

struct ManifestClass {
  std::string class_id;
  std::optional<SynthClassSpec> spec;       // synthetic only
  std::vector<std::string> train;            // cache file (synthetic) or OFF paths
  std::vector<std::string> test;
  int train_count = 0;
  int test_count = 0;
};

struct DatasetManifest {
  Provenance provenance = Provenance::kSynthetic;
  Eigen::Index n = 256;
  std::uint64_t seed = 0;
  std::vector<ManifestClass> classes;

  /// Unique class ids, >= 2 train and >= 1 test per class. Throws kBadSpec.
  void validate() const;
};

/// Clouds grouped by class; labels are the class' index in `class_ids`.
struct Dataset {
  std::vector<std::string> class_ids;
  std::vector<std::vector<PointCloud>> train;
  std::vector<std::vector<PointCloud>> test;
  Eigen::Index n = 0;
};

struct Benchmark {
  DatasetManifest manifest;
  Dataset data;
};

constexpr int kMaxSynthClasses = static_cast<int>(kAllFamilies.size());

/// First n_classes families in kAllFamilies order, default ranges. Train and
/// test samples of class c come from streams mix_seed(seed, 2c) and
/// mix_seed(seed, 2c + 1). Throws kTooManyClasses, kBadSpec.
Benchmark build_benchmark(int n_classes, int per_class_train, int per_class_test, Eigen::Index n,
                          std::uint64_t seed, double noise_sigma = 0.01);

/// Writes <class>_train.mirp / <class>_test.mirp and manifest.json into dir;
/// returns the manifest path.
std::filesystem::path write_benchmark(const Benchmark& bench, const std::filesystem::path& dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Resolves paths relative to the manifest's directory. OFF inputs are
/// normalized, reduced to n points by farthest point sampling and normalized
/// again.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace shapemem

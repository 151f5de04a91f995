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

#include <doctest.h>

#include <string_view>
#include <unordered_set>

#include "helpers.hpp"
#include "shapemem/data.hpp"
#include "shapemem/error.hpp"

using namespace shapemem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kConfig;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::size_t cloud_hash(const PointCloud& pc) {
  return std::hash<std::string_view>{}(
      std::string_view(reinterpret_cast<const char*>(pc.points.data()), sizeof(double) * pc.points.size()));
}

}  // namespace

TEST_CASE("family names round trip") {
  for (Family f : kAllFamilies) CHECK(family_from_name(family_name(f)) == f);
  CHECK(code_of([] { family_from_name("dodecahedron"); }) == ErrorCode::kBadSpec);
}

TEST_CASE("fixed parameters and no noise give identical clouds") {
  SynthClassSpec spec;
  spec.family = Family::kBox;
  spec.params = {Range{1.0, 1.0}, Range{0.5, 0.5}, Range{0.3, 0.3}};
  spec.count = 4;
  const auto clouds = synth_generate(spec, 64, 1);
  REQUIRE(clouds.size() == 4);
  for (const auto& pc : clouds) CHECK(pc.points == clouds[0].points);
}

TEST_CASE("noise-free spheres land on the unit sphere") {
  const auto clouds = synth_generate(default_spec(Family::kSphere, 3, 0.0), 128, 5);
  for (const auto& pc : clouds)
    for (Eigen::Index i = 0; i < pc.size(); ++i) CHECK(std::abs(pc.points.row(i).norm() - 1.0) <= 1e-9);
}

TEST_CASE("generation is seeded") {
  for (Family f : kAllFamilies) {
    const SynthClassSpec spec = default_spec(f, 2);
    const auto a = synth_generate(spec, 64, 10);
    const auto b = synth_generate(spec, 64, 10);
    const auto c = synth_generate(spec, 64, 11);
    CHECK(a[0].points == b[0].points);
    CHECK(a[1].points == b[1].points);
    CHECK_FALSE(a[0].points == c[0].points);
    CHECK(a[0].points.allFinite());
    CHECK(std::abs(a[0].points.rowwise().norm().maxCoeff() - 1.0) <= 1e-12);
  }
}

TEST_CASE("spec validation") {
  SynthClassSpec torus = default_spec(Family::kTorus, 1);
  torus.params[1] = Range{0.9, 1.1};  // tube wider than the ring
  CHECK(code_of([&] { torus.validate(); }) == ErrorCode::kBadSpec);
  SynthClassSpec noisy = default_spec(Family::kSphere, 1);
  noisy.noise_sigma = -0.1;
  CHECK(code_of([&] { noisy.validate(); }) == ErrorCode::kBadSpec);
  CHECK(code_of([] { synth_generate(default_spec(Family::kSphere, 1), 4, 1); }) == ErrorCode::kBadSpec);
}

TEST_CASE("minimal OFF file parses exactly") {
  const auto dir = testing::scratch_dir("off_min");
  write_file(dir / "t.off", "OFF\n3 1 0\n0 0 0\n1.5 0 -2\n0 0.25 1e3\n3 0 1 2\n");
  const PointCloud pc = read_off(dir / "t.off");
  REQUIRE(pc.size() == 3);
  CHECK(pc.points(1, 0) == 1.5);
  CHECK(pc.points(1, 2) == -2.0);
  CHECK(pc.points(2, 1) == 0.25);
  CHECK(pc.points(2, 2) == 1000.0);
}

TEST_CASE("OFF header forms agree") {
  const auto dir = testing::scratch_dir("off_fused");
  const std::string body = "0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 2 3\n";
  write_file(dir / "a.off", "OFF\n4 2 0\n" + body);
  write_file(dir / "b.off", "OFF4 2 0\n" + body);
  write_file(dir / "c.off", "# comment\nOFF\n\n# counts follow\n4 2 0\n" + body);
  const PointCloud a = read_off(dir / "a.off");
  CHECK(a.size() == 4);
  CHECK(read_off(dir / "b.off").points == a.points);
  CHECK(read_off(dir / "c.off").points == a.points);
}

TEST_CASE("malformed OFF files") {
  const auto dir = testing::scratch_dir("off_bad");
  write_file(dir / "short.off", "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n");
  CHECK(code_of([&] { read_off(dir / "short.off"); }) == ErrorCode::kParseError);
  write_file(dir / "magic.off", "PLY\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n");
  CHECK(code_of([&] { read_off(dir / "magic.off"); }) == ErrorCode::kParseError);
  write_file(dir / "num.off", "OFF\n2 0 0\n0 0 0\n1 x 0\n");
  try {
    read_off(dir / "num.off");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
  CHECK(code_of([&] { read_off(dir / "absent.off"); }) == ErrorCode::kIoFailure);
}

TEST_CASE("OFF write then read is exact") {
  Rng rng(3);
  const PointCloud pc{testing::random_points(rng, 20)};
  const auto dir = testing::scratch_dir("off_rt");
  write_off(pc, dir / "x.off");
  CHECK(read_off(dir / "x.off").points == pc.points);
}

TEST_CASE("cloud caches round trip and reject truncation") {
  const auto clouds = synth_generate(default_spec(Family::kCone, 3), 32, 4);
  const auto dir = testing::scratch_dir("mirp");
  save_clouds(clouds, dir / "c.mirp");
  const auto back = load_clouds(dir / "c.mirp");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i].points == clouds[i].points);
  const std::string bytes = testing::read_bytes(dir / "c.mirp");
  write_file(dir / "t.mirp", bytes.substr(0, bytes.size() - 8));
  CHECK(code_of([&] { load_clouds(dir / "t.mirp"); }) == ErrorCode::kBadMagic);
}

TEST_CASE("benchmark sizes and split disjointness") {
  const Benchmark b = build_benchmark(8, 20, 10, 64, 2026);
  std::size_t train = 0, test = 0;
  std::unordered_set<std::size_t> train_hashes;
  for (std::size_t c = 0; c < 8; ++c) {
    train += b.data.train[c].size();
    test += b.data.test[c].size();
    for (const auto& pc : b.data.train[c]) {
      CHECK(pc.label == static_cast<int>(c));
      train_hashes.insert(cloud_hash(pc));
    }
  }
  CHECK(train == 160);
  CHECK(test == 80);
  CHECK(train_hashes.size() == 160);
  for (const auto& split : b.data.test)
    for (const auto& pc : split) CHECK(train_hashes.count(cloud_hash(pc)) == 0);
  CHECK(b.manifest.classes.size() == 8);
  CHECK(code_of([] { build_benchmark(9, 20, 10, 64, 1); }) == ErrorCode::kTooManyClasses);
}

TEST_CASE("benchmark files are reproducible and reload exactly") {
  const Benchmark b = build_benchmark(3, 4, 2, 32, 77);
  const auto d1 = testing::scratch_dir("bench_a"), d2 = testing::scratch_dir("bench_b");
  const auto m1 = write_benchmark(b, d1);
  write_benchmark(build_benchmark(3, 4, 2, 32, 77), d2);
  for (const auto& entry : std::filesystem::directory_iterator(d1))
    CHECK(testing::read_bytes(entry.path()) == testing::read_bytes(d2 / entry.path().filename()));

  const Dataset d = load_dataset(m1);
  CHECK(d.class_ids == b.data.class_ids);
  CHECK(d.n == 32);
  for (std::size_t c = 0; c < 3; ++c) {
    REQUIRE(d.train[c].size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(d.train[c][i].points == b.data.train[c][i].points);
    CHECK(d.test[c][1].label == static_cast<int>(c));
  }
  const DatasetManifest m = load_manifest(m1);
  CHECK(m.seed == 77);
  REQUIRE(m.classes[0].spec.has_value());
  CHECK(m.classes[0].spec->family == Family::kSphere);
}

TEST_CASE("manifests of OFF files are sampled to n points") {
  const auto dir = testing::scratch_dir("off_manifest");
  Rng rng(12);
  DatasetManifest m;
  m.provenance = Provenance::kOffFiles;
  m.n = 16;
  for (const char* id : {"a", "b"}) {
    ManifestClass mc;
    mc.class_id = id;
    for (int i = 0; i < 3; ++i) {
      const std::string name = std::string(id) + std::to_string(i) + ".off";
      write_off(PointCloud{testing::random_points(rng, 40, 5.0)}, dir / name);
      (i < 2 ? mc.train : mc.test).push_back(name);
    }
    mc.train_count = 2;
    mc.test_count = 1;
    m.classes.push_back(mc);
  }
  save_manifest(m, dir / "manifest.json");
  const Dataset d = load_dataset(dir / "manifest.json");
  REQUIRE(d.train.size() == 2);
  CHECK(d.train[1].size() == 2);
  CHECK(d.test[1].size() == 1);
  CHECK(d.train[0][0].size() == 16);
  CHECK(std::abs(d.train[0][0].points.rowwise().norm().maxCoeff() - 1.0) <= 1e-12);
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  ManifestClass a{"a", std::nullopt, {"x", "y"}, {"z"}, 2, 1};
  m.classes = {a, a};
  CHECK(code_of([&] { m.validate(); }) == ErrorCode::kBadSpec);
  a.train = {"x"};
  a.train_count = 1;
  m.classes = {a};
  CHECK(code_of([&] { m.validate(); }) == ErrorCode::kBadSpec);
  CHECK(code_of([] { load_manifest("/nonexistent/manifest.json"); }) == ErrorCode::kIoFailure);
}

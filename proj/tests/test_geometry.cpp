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

#include <limits>
#include <set>

#include "helpers.hpp"
#include "shapemem/error.hpp"
#include "shapemem/geometry.hpp"

using namespace shapemem;

namespace {

PointCloud cloud(std::initializer_list<std::array<double, 3>> rows) {
  PointCloud pc;
  pc.points.resize(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::Index i = 0;
  for (const auto& r : rows) pc.points.row(i++) << r[0], r[1], r[2];
  return pc;
}

}  // namespace

TEST_CASE("normalize leaves a centered unit cloud unchanged") {
  const PointCloud pc = cloud({{1, 0, 0}, {-1, 0, 0}, {0, 0.5, 0}, {0, -0.5, 0}});
  const PointCloud out = normalize(pc);
  CHECK((out.points - pc.points).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("normalize collapses identical points to zeros") {
  const PointCloud out = normalize(cloud({{1, 1, 1}, {1, 1, 1}}));
  CHECK(out.points.isZero(0.0));
}

TEST_CASE("normalize centers and scales a random cloud") {
  Rng rng(11);
  PointCloud pc{testing::random_points(rng, 100, 3.0)};
  pc.points.rowwise() += Eigen::RowVector3d(5, -2, 1);
  const PointCloud out = normalize(pc);
  CHECK(out.points.colwise().mean().norm() <= 1e-12);
  CHECK(std::abs(out.points.rowwise().norm().maxCoeff() - 1.0) <= 1e-12);
}

TEST_CASE("normalize keeps the label and rejects bad input") {
  PointCloud pc = cloud({{1, 2, 3}, {0, 0, 0}});
  pc.label = 4;
  CHECK(normalize(pc).label == 4);
  pc.points(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(normalize(pc), Error);
  try {
    normalize(pc);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
  }
  CHECK_THROWS_AS(normalize(PointCloud{}), Error);
}

TEST_CASE("farthest point sampling with n = size returns a permutation") {
  Rng rng(3);
  const PointCloud pc{testing::random_points(rng, 40)};
  const PointCloud out = farthest_point_sample(pc, 40);
  REQUIRE(out.size() == 40);
  std::multiset<std::vector<double>> a, b;
  for (Eigen::Index i = 0; i < 40; ++i) {
    a.insert({pc.points(i, 0), pc.points(i, 1), pc.points(i, 2)});
    b.insert({out.points(i, 0), out.points(i, 1), out.points(i, 2)});
  }
  CHECK(a == b);
}

TEST_CASE("farthest point sampling picks opposite square corners") {
  const PointCloud square = cloud({{1, 1, 0}, {1, -1, 0}, {-1, 1, 0}, {-1, -1, 0}});
  const PointCloud out = farthest_point_sample(square, 2);
  // brute force: the best 2-subset maximizes the pairwise distance
  double best = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) best = std::max(best, (square.points.row(i) - square.points.row(j)).norm());
  CHECK((out.points.row(0) - out.points.row(1)).norm() == doctest::Approx(best).epsilon(1e-15));
  // all norms tie, so the lowest index is the first pick
  CHECK(out.points.row(0) == square.points.row(0));
  CHECK(out.points.row(1) == square.points.row(3));
}

TEST_CASE("farthest point sampling with n = 1 returns the max-norm point") {
  const PointCloud pc = cloud({{0.1, 0, 0}, {0, 3, 0}, {1, 1, 1}});
  const PointCloud out = farthest_point_sample(pc, 1);
  REQUIRE(out.size() == 1);
  CHECK(out.points.row(0) == pc.points.row(1));
}

TEST_CASE("farthest point sampling rejects an oversized budget") {
  const PointCloud pc = cloud({{0, 0, 0}, {1, 0, 0}});
  try {
    farthest_point_sample(pc, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBudgetExceeds);
  }
}

TEST_CASE("correspond to itself is the identity") {
  Rng rng(5);
  const PointCloud pc{testing::random_points(rng, 30)};
  CHECK(correspond(pc, pc) == pc.points);
}

TEST_CASE("correspond to a single point repeats it") {
  const PointCloud ref = cloud({{0, 0, 0}, {5, 5, 5}, {-1, 2, 0}});
  const PointCloud target = cloud({{7, 8, 9}});
  const Points out = correspond(ref, target);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(out.row(i) == target.points.row(0));
}

TEST_CASE("correspond matches an exhaustive distance table") {
  const PointCloud ref = cloud({{0, 0, 0}, {2, 0, 0}, {0, 3, 1}});
  const PointCloud target = cloud({{1, 1, 0}, {3, 0, 0}, {0, 2, 2}, {-1, 0, 0}});
  // squared distances, rows = reference, cols = target:
  //   ref0: 2, 9, 8, 1  -> target 3
  //   ref1: 2, 1, 12, 9 -> target 1
  //   ref2: 6, 19, 2, 11 -> target 2
  const Points out = correspond(ref, target);
  CHECK(out.row(0) == target.points.row(3));
  CHECK(out.row(1) == target.points.row(1));
  CHECK(out.row(2) == target.points.row(2));
}

TEST_CASE("correspond breaks ties toward the lowest index") {
  const PointCloud ref = cloud({{0, 0, 0}});
  const PointCloud target = cloud({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}});
  CHECK(correspond(ref, target).row(0) == target.points.row(0));
}

TEST_CASE("correspond rejects an empty target") {
  try {
    correspond(cloud({{0, 0, 0}}), PointCloud{Points(0, 3)});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyTarget);
  }
}

TEST_CASE("make_corresponded_set aligns every member to the reference") {
  Rng rng(9);
  std::vector<PointCloud> clouds;
  for (int i = 0; i < 4; ++i) clouds.push_back({testing::random_points(rng, 12)});
  const CorrespondedSet set = make_corresponded_set("c", clouds, 1);
  CHECK(set.class_id == "c");
  CHECK(set.reference.points == clouds[1].points);
  REQUIRE(set.members.size() == 4);
  CHECK(set.members[1] == clouds[1].points);
  for (const auto& m : set.members) CHECK(m.rows() == 12);
}

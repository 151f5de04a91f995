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

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace shapemem {

/// n x 3 coordinates, row-major so that the raw buffer is vect(X) with
/// (x0, y0, z0, x1, ...) ordering.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct PointCloud {
  Points points;
  std::optional<int> label;

  Eigen::Index size() const { return points.rows(); }
};

/// Members of one class resampled so that row i of every member refers to
/// reference point i.
struct CorrespondedSet {
  std::string class_id;
  PointCloud reference;
  std::vector<Points> members;
};

/// Centers on the centroid and scales to unit max norm. A cloud whose points
/// are all identical collapses to zeros. Throws kNonFinite.
PointCloud normalize(const PointCloud& pc);

/// Greedy farthest point sampling. The first pick is the max-norm point, each
/// later pick maximizes the distance to the picked set; ties go to the lowest
/// index. Output rows are in pick order. Throws kBudgetExceeds if n > |pc|.
PointCloud farthest_point_sample(const PointCloud& pc, Eigen::Index n);

/// Row i is the target point nearest to reference row i (lowest index on ties).
/// Throws kEmptyTarget.
Points correspond(const PointCloud& reference, const PointCloud& target);

/// Builds a CorrespondedSet with `clouds[reference_index]` as the reference.
CorrespondedSet make_corresponded_set(std::string class_id, const std::vector<PointCloud>& clouds,
                                      std::size_t reference_index = 0);

bool all_finite(const Points& points);

}  // namespace shapemem

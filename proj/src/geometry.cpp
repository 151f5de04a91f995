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

#include "shapemem/geometry.hpp"

#include <cmath>
#include <limits>

#include "shapemem/error.hpp"

namespace shapemem {

namespace {

double squared_distance(const Points& a, Eigen::Index i, const Points& b, Eigen::Index j) {
  const double dx = a(i, 0) - b(j, 0);
  const double dy = a(i, 1) - b(j, 1);
  const double dz = a(i, 2) - b(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

bool all_finite(const Points& points) { return points.allFinite(); }

PointCloud normalize(const PointCloud& pc) {
  if (pc.size() == 0) throw Error(ErrorCode::kEmptySet, "normalize: empty cloud");
  if (!all_finite(pc.points)) throw Error(ErrorCode::kNonFinite, "normalize: non-finite coordinate");

  PointCloud out{Points::Zero(pc.size(), 3), pc.label};

  bool degenerate = true;
  for (Eigen::Index i = 1; i < pc.size() && degenerate; ++i)
    degenerate = pc.points.row(i) == pc.points.row(0);
  if (degenerate) return out;

  const Eigen::RowVector3d centroid = pc.points.colwise().mean();
  out.points = pc.points.rowwise() - centroid;
  const double max_norm = out.points.rowwise().norm().maxCoeff();
  if (max_norm > 0.0) out.points /= max_norm;
  return out;
}

PointCloud farthest_point_sample(const PointCloud& pc, Eigen::Index n) {
  const Eigen::Index total = pc.size();
  if (n < 1) throw Error(ErrorCode::kBudgetExceeds, "farthest_point_sample: n must be >= 1");
  if (n > total)
    throw Error(ErrorCode::kBudgetExceeds, "farthest_point_sample: n=" + std::to_string(n) +
                                               " exceeds cloud size " + std::to_string(total));

  std::vector<Eigen::Index> picks;
  picks.reserve(static_cast<std::size_t>(n));

  Eigen::Index first = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < total; ++i) {
    const double sq = pc.points.row(i).squaredNorm();
    if (sq > best) {
      best = sq;
      first = i;
    }
  }
  picks.push_back(first);

  // -1 marks an already picked row.
  std::vector<double> min_sq(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  min_sq[static_cast<std::size_t>(first)] = -1.0;
  Eigen::Index last = first;
  while (static_cast<Eigen::Index>(picks.size()) < n) {
    Eigen::Index next = -1;
    double far = -1.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      double& d = min_sq[static_cast<std::size_t>(i)];
      if (d < 0.0) continue;
      d = std::min(d, squared_distance(pc.points, i, pc.points, last));
      if (d > far) {
        far = d;
        next = i;
      }
    }
    min_sq[static_cast<std::size_t>(next)] = -1.0;
    picks.push_back(next);
    last = next;
  }

  PointCloud out{Points(n, 3), pc.label};
  for (Eigen::Index r = 0; r < n; ++r) out.points.row(r) = pc.points.row(picks[static_cast<std::size_t>(r)]);
  return out;
}

Points correspond(const PointCloud& reference, const PointCloud& target) {
  if (target.size() == 0) throw Error(ErrorCode::kEmptyTarget, "correspond: target has no points");
  Points out(reference.size(), 3);
  for (Eigen::Index i = 0; i < reference.size(); ++i) {
    Eigen::Index best = 0;
    double best_sq = squared_distance(reference.points, i, target.points, 0);
    for (Eigen::Index j = 1; j < target.size(); ++j) {
      const double sq = squared_distance(reference.points, i, target.points, j);
      if (sq < best_sq) {
        best_sq = sq;
        best = j;
      }
    }
    out.row(i) = target.points.row(best);
  }
  return out;
}

CorrespondedSet make_corresponded_set(std::string class_id, const std::vector<PointCloud>& clouds,
                                      std::size_t reference_index) {
  if (clouds.empty()) throw Error(ErrorCode::kEmptySet, "make_corresponded_set: no clouds");
  if (reference_index >= clouds.size())
    throw Error(ErrorCode::kDimensionMismatch, "make_corresponded_set: reference index out of range");
  CorrespondedSet set{std::move(class_id), clouds[reference_index], {}};
  set.members.reserve(clouds.size());
  for (const auto& c : clouds) set.members.push_back(correspond(set.reference, c));
  return set;
}

}  // namespace shapemem

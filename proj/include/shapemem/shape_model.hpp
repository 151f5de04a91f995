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

// Per-class statistical shape models: the mean of a corresponded training set
// plus its k leading modes of variation and their singular values. A model of
// k modes replaces k+1 stored point clouds in the replay memory.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapemem/geometry.hpp"

namespace shapemem {

constexpr int kDefaultModes = 2;
constexpr int kMaxModes = 8;

struct ShapeModel {
  std::string class_id;
  Points mean;                // n x 3
  std::vector<Points> modes;  // k entries, each n x 3, orthonormal as 3n-vectors
  std::vector<double> sigmas; // descending, >= 0

  Eigen::Index n() const { return mean.rows(); }
  int k() const { return static_cast<int>(modes.size()); }
};

struct GeneratedSample {
  Points points;
  std::string class_id;
  std::vector<double> epsilons;
  double alpha = 0.0;
};

/// Leading left singular vectors of a tall or wide matrix.
struct LeftSingular {
  Eigen::MatrixXd vectors;  // rows x k, orthonormal columns
  Eigen::VectorXd values;   // k, descending
};

/// Top-k left singular pairs of `y` by one-sided (Hestenes) Jacobi on its
/// columns, so the work is O(rows * cols^2) per sweep and no rows x rows
/// matrix is formed. Columns whose norm is at most max(zero_floor,
/// max(rows, cols) * eps * sigma_max) get sigma = 0 and a
/// deterministic orthonormal completion. Sign convention: the largest-magnitude
/// entry of each vector is non-negative (lowest index on ties).
LeftSingular leading_left_singular(const Eigen::MatrixXd& y, int k, double zero_floor = 0.0);

/// Throws kInvalidK when k > min(3n, m) or k < 0, kEmptySet when m == 0,
/// kDimensionMismatch when members disagree in n.
ShapeModel build_shape_model(const CorrespondedSet& set, int k);

/// mean + alpha * sum_i eps_i sigma_i V_i. Throws kDimensionMismatch if
/// |epsilons| != k, kBadSpec if alpha < 0.
GeneratedSample generate_sample(const ShapeModel& model, double alpha, std::span<const double> epsilons);

/// n_s samples; epsilons are drawn k at a time, in sample order, from
/// Rng(seed).normal().
std::vector<GeneratedSample> generate_replay_batch(const ShapeModel& model, int n_s, double alpha,
                                                   std::uint64_t seed);

struct MemoryFootprint {
  std::int64_t units = 0;   // point-cloud equivalents: mean + each mode
  std::int64_t floats = 0;  // 3n(k+1) + k per model
};

MemoryFootprint memory_footprint(std::span<const ShapeModel> models);

/// max_{i,j} |<vect V_i, vect V_j> - delta_ij|; zero for k = 0.
double orthonormality_residual(const ShapeModel& model);

// "MIR3" persistence: magic, u32 version, u32 n, u32 k, u32 length + UTF-8
// class id, then mean, modes, sigmas as little-endian f64, row-major.
constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const ShapeModel& model, const std::filesystem::path& path);

/// Throws kIoFailure, kBadMagic (wrong tag or truncated), kVersionMismatch.
ShapeModel load_model(const std::filesystem::path& path);

/// Byte count of a MIR3 file; used by tests and `inspect`.
std::size_t model_file_size(Eigen::Index n, int k, std::size_t class_id_bytes);

}  // namespace shapemem

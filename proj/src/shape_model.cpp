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

#include "shapemem/shape_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shapemem/binary_io.hpp"
#include "shapemem/error.hpp"
#include "shapemem/rng.hpp"

namespace shapemem {

namespace {

constexpr int kMaxJacobiSweeps = 100;

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (v(arg) < 0.0) v = -v;
}

// Orthonormal vector orthogonal to the first `filled` columns of `basis`,
// built from the canonical basis vector with the largest residual.
Eigen::VectorXd complete_basis(const Eigen::MatrixXd& basis, Eigen::Index filled) {
  const Eigen::Index rows = basis.rows();
  const auto q = basis.leftCols(filled);
  Eigen::Index pick = 0;
  double best = -1.0;
  for (Eigen::Index j = 0; j < rows; ++j) {
    // residual^2 of e_j = 1 - ||Q^T e_j||^2
    const double res = 1.0 - q.row(j).squaredNorm();
    if (res > best) {
      best = res;
      pick = j;
    }
  }
  Eigen::VectorXd v = Eigen::VectorXd::Unit(rows, pick);
  for (int pass = 0; pass < 2; ++pass) v -= q * (q.transpose() * v);
  v.normalize();
  return v;
}

}  // namespace

LeftSingular leading_left_singular(const Eigen::MatrixXd& y, int k, double zero_floor) {
  const Eigen::Index rows = y.rows();
  const Eigen::Index cols = y.cols();
  if (k < 0 || k > std::min(rows, cols))
    throw Error(ErrorCode::kInvalidK, "k=" + std::to_string(k) + " exceeds min(rows, cols)");

  Eigen::MatrixXd a = y;
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < cols; ++p) {
      for (Eigen::Index q = p + 1; q < cols; ++q) {
        const double alpha = a.col(p).squaredNorm();
        const double beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= std::numeric_limits<double>::epsilon() * std::sqrt(alpha * beta))
          continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index r = 0; r < rows; ++r) {
          const double ap = a(r, p);
          const double aq = a(r, q);
          a(r, p) = c * ap - s * aq;
          a(r, q) = s * ap + c * aq;
        }
      }
    }
    if (!rotated) break;
  }

  Eigen::VectorXd norms(cols);
  for (Eigen::Index j = 0; j < cols; ++j) norms(j) = a.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cols));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) { return norms(l) > norms(r); });

  const double largest = cols > 0 ? norms(order.front()) : 0.0;
  const double tol = std::max(
      zero_floor, static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * largest);

  LeftSingular out{Eigen::MatrixXd::Zero(rows, k), Eigen::VectorXd::Zero(k)};
  for (int i = 0; i < k; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    if (norms(src) > tol && norms(src) > 0.0) {
      out.values(i) = norms(src);
      out.vectors.col(i) = a.col(src) / norms(src);
    } else {
      out.vectors.col(i) = complete_basis(out.vectors, i);
    }
    fix_sign(out.vectors.col(i));
  }
  return out;
}

ShapeModel build_shape_model(const CorrespondedSet& set, int k) {
  const auto m = static_cast<Eigen::Index>(set.members.size());
  if (m == 0) throw Error(ErrorCode::kEmptySet, "build_shape_model: no members");
  const Eigen::Index n = set.members.front().rows();
  for (const auto& member : set.members)
    if (member.rows() != n) throw Error(ErrorCode::kDimensionMismatch, "build_shape_model: ragged members");
  if (k < 0 || k > std::min(3 * n, m))
    throw Error(ErrorCode::kInvalidK, "build_shape_model: k=" + std::to_string(k) + " exceeds min(3n, m)=" +
                                          std::to_string(std::min(3 * n, m)));

  ShapeModel model;
  model.class_id = set.class_id;
  model.mean = Points::Zero(n, 3);
  for (const auto& member : set.members) model.mean += member;
  model.mean /= static_cast<double>(m);

  // Column i is vect(X_i - mean) in row-major (x0, y0, z0, x1, ...) order.
  Eigen::MatrixXd y(3 * n, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Points centered = set.members[static_cast<std::size_t>(i)] - model.mean;
    y.col(i) = Eigen::Map<const Eigen::VectorXd>(centered.data(), 3 * n);
  }

  // Centering leaves rounding residue of order eps * |X| per entry even for a
  // zero-variance class; columns at that level count as exact zeros.
  double scale = 0.0;
  for (const auto& member : set.members) scale = std::max(scale, member.cwiseAbs().maxCoeff());
  const double floor = static_cast<double>(std::max(3 * n, m)) * std::numeric_limits<double>::epsilon() *
                       scale * std::sqrt(static_cast<double>(3 * n));
  const LeftSingular svd = leading_left_singular(y, k, floor);
  for (int i = 0; i < k; ++i) {
    Points mode(n, 3);
    Eigen::Map<Eigen::VectorXd>(mode.data(), 3 * n) = svd.vectors.col(i);
    model.modes.push_back(std::move(mode));
    model.sigmas.push_back(svd.values(i));
  }
  return model;
}

GeneratedSample generate_sample(const ShapeModel& model, double alpha, std::span<const double> epsilons) {
  if (static_cast<int>(epsilons.size()) != model.k())
    throw Error(ErrorCode::kDimensionMismatch, "generate_sample: expected " + std::to_string(model.k()) +
                                                   " epsilons, got " + std::to_string(epsilons.size()));
  if (!(alpha >= 0.0)) throw Error(ErrorCode::kBadSpec, "generate_sample: alpha must be >= 0");

  GeneratedSample sample{model.mean, model.class_id, {epsilons.begin(), epsilons.end()}, alpha};
  // alpha == 0 or k == 0 returns the mean bit for bit (adding +0.0 would turn -0.0 entries into +0.0).
  if (alpha == 0.0 || model.k() == 0) return sample;

  Points offset = Points::Zero(model.n(), 3);
  for (int i = 0; i < model.k(); ++i)
    offset += (epsilons[static_cast<std::size_t>(i)] * model.sigmas[static_cast<std::size_t>(i)]) *
              model.modes[static_cast<std::size_t>(i)];
  sample.points = model.mean + alpha * offset;
  return sample;
}

std::vector<GeneratedSample> generate_replay_batch(const ShapeModel& model, int n_s, double alpha,
                                                   std::uint64_t seed) {
  if (n_s < 1) throw Error(ErrorCode::kBadSpec, "generate_replay_batch: n_s must be >= 1");
  Rng rng(seed);
  std::vector<GeneratedSample> batch;
  batch.reserve(static_cast<std::size_t>(n_s));
  std::vector<double> eps(static_cast<std::size_t>(model.k()));
  for (int j = 0; j < n_s; ++j) {
    for (double& e : eps) e = rng.normal();
    batch.push_back(generate_sample(model, alpha, eps));
  }
  return batch;
}

MemoryFootprint memory_footprint(std::span<const ShapeModel> models) {
  MemoryFootprint fp;
  for (const auto& m : models) {
    fp.units += m.k() + 1;
    fp.floats += 3 * m.n() * (m.k() + 1) + m.k();
  }
  return fp;
}

double orthonormality_residual(const ShapeModel& model) {
  double worst = 0.0;
  const Eigen::Index len = 3 * model.n();
  for (int i = 0; i < model.k(); ++i) {
    const Eigen::Map<const Eigen::VectorXd> vi(model.modes[static_cast<std::size_t>(i)].data(), len);
    for (int j = 0; j < model.k(); ++j) {
      const Eigen::Map<const Eigen::VectorXd> vj(model.modes[static_cast<std::size_t>(j)].data(), len);
      worst = std::max(worst, std::abs(vi.dot(vj) - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

void save_model(const ShapeModel& model, const std::filesystem::path& path) {
  binio::Writer w;
  w.magic("MIR3");
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.n()));
  w.u32(static_cast<std::uint32_t>(model.k()));
  w.str(model.class_id);
  w.f64s({model.mean.data(), static_cast<std::size_t>(model.mean.size())});
  for (const auto& mode : model.modes) w.f64s({mode.data(), static_cast<std::size_t>(mode.size())});
  w.f64s(model.sigmas);
  w.write_file(path);
}

ShapeModel load_model(const std::filesystem::path& path) {
  auto r = binio::Reader::from_file(path);
  if (!r.expect_magic("MIR3")) throw Error(ErrorCode::kBadMagic, path.string() + " is not a MIR3 file");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    throw Error(ErrorCode::kVersionMismatch, "MIR3 version " + std::to_string(version) + " unsupported");
  const std::uint32_t n = r.u32();
  const std::uint32_t k = r.u32();
  ShapeModel model;
  model.class_id = r.str();

  const std::size_t payload = (std::size_t{3} * n * (k + std::size_t{1}) + k) * 8;
  if (r.remaining() != payload)
    throw Error(ErrorCode::kBadMagic, "MIR3 payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                                          std::to_string(payload));
  model.mean.resize(n, 3);
  r.f64s({model.mean.data(), static_cast<std::size_t>(model.mean.size())});
  for (std::uint32_t i = 0; i < k; ++i) {
    Points mode(n, 3);
    r.f64s({mode.data(), static_cast<std::size_t>(mode.size())});
    model.modes.push_back(std::move(mode));
  }
  model.sigmas.resize(k);
  r.f64s(model.sigmas);
  return model;
}

std::size_t model_file_size(Eigen::Index n, int k, std::size_t class_id_bytes) {
  const std::size_t header = 4 + 4 + 4 + 4 + 4 + class_id_bytes;
  return header + (static_cast<std::size_t>(3 * n * (k + 1)) + static_cast<std::size_t>(k)) * 8;
}

}  // namespace shapemem

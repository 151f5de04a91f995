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

#include "shapemem/network.hpp"

#include <algorithm>
#include <cmath>

#include "shapemem/binary_io.hpp"
#include "shapemem/error.hpp"
#include "shapemem/rng.hpp"

namespace shapemem {

namespace {

constexpr std::uint64_t kHeadStreamBase = 1000;

void fill_uniform(Eigen::MatrixXd& m, double s, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-s, s);
}

void init_head_row(Eigen::MatrixXd& w4, Eigen::Index row, std::uint64_t seed) {
  Rng rng(mix_seed(seed, kHeadStreamBase + static_cast<std::uint64_t>(row)));
  const double s = std::sqrt(6.0 / (2.0 * static_cast<double>(w4.cols())));
  for (Eigen::Index c = 0; c < w4.cols(); ++c) w4(row, c) = rng.uniform(-s, s);
}

Eigen::VectorXd relu_mask(const Eigen::VectorXd& pre) { return (pre.array() > 0.0).cast<double>(); }

}  // namespace

std::size_t ClassifierParams::size() const {
  std::size_t total = 0;
  visit([&](const auto& t) { total += static_cast<std::size_t>(t.size()); });
  return total;
}

ClassifierParams ClassifierParams::zeros_like(const ClassifierParams& p) {
  ClassifierParams z;
  z.w1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
  z.b1 = Eigen::VectorXd::Zero(p.b1.size());
  z.w2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
  z.b2 = Eigen::VectorXd::Zero(p.b2.size());
  z.w3 = Eigen::MatrixXd::Zero(p.w3.rows(), p.w3.cols());
  z.b3 = Eigen::VectorXd::Zero(p.b3.size());
  z.w4 = Eigen::MatrixXd::Zero(p.w4.rows(), p.w4.cols());
  z.b4 = Eigen::VectorXd::Zero(p.b4.size());
  return z;
}

ClassifierParams& ClassifierParams::operator+=(const ClassifierParams& o) {
  w1 += o.w1; b1 += o.b1; w2 += o.w2; b2 += o.b2;
  w3 += o.w3; b3 += o.b3; w4 += o.w4; b4 += o.b4;
  return *this;
}

ClassifierParams& ClassifierParams::operator*=(double s) {
  visit([s](auto& t) { t *= s; });
  return *this;
}

bool ClassifierParams::all_finite() const {
  bool ok = true;
  visit([&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

bool ClassifierParams::operator==(const ClassifierParams& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return same(w1, o.w1) && same(b1, o.b1) && same(w2, o.w2) && same(b2, o.b2) && same(w3, o.w3) &&
         same(b3, o.b3) && same(w4, o.w4) && same(b4, o.b4);
}

std::vector<double> ClassifierParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  visit([&](const auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) flat.push_back(t(r, c));
  });
  return flat;
}

void ClassifierParams::assign(const std::vector<double>& flat) {
  if (flat.size() != size()) throw Error(ErrorCode::kDimensionMismatch, "ClassifierParams::assign: size mismatch");
  std::size_t i = 0;
  visit([&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = flat[i++];
  });
}

void axpy(double scale, const ClassifierParams& src, ClassifierParams& dst) {
  dst.w1 += scale * src.w1; dst.b1 += scale * src.b1;
  dst.w2 += scale * src.w2; dst.b2 += scale * src.b2;
  dst.w3 += scale * src.w3; dst.b3 += scale * src.b3;
  dst.w4 += scale * src.w4; dst.b4 += scale * src.b4;
}

ClassifierParams init_params(const NetworkDims& dims, int classes, std::uint64_t seed) {
  if (dims.h1 < 1 || dims.h2 < 1 || dims.h3 < 1 || classes < 1)
    throw Error(ErrorCode::kBadSpec, "init_params: all dimensions must be >= 1");
  ClassifierParams p;
  p.w1.resize(dims.h1, 3);
  p.w2.resize(dims.h2, dims.h1);
  p.w3.resize(dims.h3, dims.h2);
  p.w4.resize(classes, dims.h3);
  Rng r1(mix_seed(seed, 1)), r2(mix_seed(seed, 2)), r3(mix_seed(seed, 3));
  fill_uniform(p.w1, std::sqrt(6.0 / (3.0 + dims.h1)), r1);
  fill_uniform(p.w2, std::sqrt(6.0 / static_cast<double>(dims.h1 + dims.h2)), r2);
  fill_uniform(p.w3, std::sqrt(6.0 / static_cast<double>(dims.h2 + dims.h3)), r3);
  for (Eigen::Index row = 0; row < classes; ++row) init_head_row(p.w4, row, seed);
  p.b1 = Eigen::VectorXd::Zero(dims.h1);
  p.b2 = Eigen::VectorXd::Zero(dims.h2);
  p.b3 = Eigen::VectorXd::Zero(dims.h3);
  p.b4 = Eigen::VectorXd::Zero(classes);
  return p;
}

ClassifierParams expand_head(const ClassifierParams& params, int new_C, std::uint64_t seed) {
  const int old_C = params.classes();
  if (new_C < old_C)
    throw Error(ErrorCode::kShrinkNotAllowed,
                "expand_head: " + std::to_string(new_C) + " < current " + std::to_string(old_C));
  ClassifierParams p = params;
  if (new_C == old_C) return p;
  p.w4.conservativeResize(new_C, Eigen::NoChange);
  p.b4.conservativeResize(new_C);
  for (Eigen::Index row = old_C; row < new_C; ++row) {
    init_head_row(p.w4, row, seed);
    p.b4(row) = 0.0;
  }
  return p;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

ForwardRecord forward(const ClassifierParams& params, const Points& points) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw Error(ErrorCode::kEmptySet, "forward: empty cloud");
  if (!points.allFinite()) throw Error(ErrorCode::kNonFinite, "forward: non-finite input");

  const auto h1 = params.w1.rows();
  const auto h2 = params.w2.rows();
  ForwardRecord rec;
  ForwardCache& c = rec.cache;
  c.a1.resize(h1, n);
  c.a2.resize(h2, n);

  // Each point goes through identical fixed-size kernels into aligned
  // temporaries, so per-point results do not depend on row position.
  Eigen::VectorXd t1(h1), t2(h2), hidden(h1);
  for (Eigen::Index p = 0; p < n; ++p) {
    const Eigen::Vector3d x = points.row(p).transpose();
    t1.noalias() = params.w1 * x;
    t1 += params.b1;
    c.a1.col(p) = t1;
    hidden = t1.cwiseMax(0.0);
    t2.noalias() = params.w2 * hidden;
    t2 += params.b2;
    c.a2.col(p) = t2;
  }

  c.pooled.resize(h2);
  c.argmax.assign(static_cast<std::size_t>(h2), 0);
  for (Eigen::Index j = 0; j < h2; ++j) {
    double best = std::max(c.a2(j, 0), 0.0);
    int arg = 0;
    for (Eigen::Index p = 1; p < n; ++p) {
      const double v = std::max(c.a2(j, p), 0.0);
      if (v > best) {
        best = v;
        arg = static_cast<int>(p);
      }
    }
    c.pooled(j) = best;
    c.argmax[static_cast<std::size_t>(j)] = arg;
  }
  c.winners = c.argmax;
  std::sort(c.winners.begin(), c.winners.end());
  c.winners.erase(std::unique(c.winners.begin(), c.winners.end()), c.winners.end());

  c.a3.noalias() = params.w3 * c.pooled;
  c.a3 += params.b3;
  c.h3 = c.a3.cwiseMax(0.0);
  rec.logits.noalias() = params.w4 * c.h3;
  rec.logits += params.b4;
  if (!rec.logits.allFinite()) throw Error(ErrorCode::kNonFinite, "forward: non-finite logits");
  rec.probs = softmax(rec.logits);
  return rec;
}

GradientBundle backward(const ClassifierParams& params, const Points& points, const ForwardRecord& record,
                        const Eigen::VectorXd& d_logits) {
  const ForwardCache& c = record.cache;
  GradientBundle g{ClassifierParams::zeros_like(params), Points::Zero(points.rows(), 3)};
  ClassifierParams& d = g.d_params;

  d.w4.noalias() = d_logits * c.h3.transpose();
  d.b4 = d_logits;
  const Eigen::VectorXd da3 = (params.w4.transpose() * d_logits).cwiseProduct(relu_mask(c.a3));
  d.w3.noalias() = da3 * c.pooled.transpose();
  d.b3 = da3;
  const Eigen::VectorXd d_pooled = params.w3.transpose() * da3;

  const auto h2 = params.w2.rows();
  Eigen::VectorXd da2(h2), dh1, da1;
  for (int p : c.winners) {
    da2.setZero();
    for (Eigen::Index j = 0; j < h2; ++j)
      if (c.argmax[static_cast<std::size_t>(j)] == p && c.a2(j, p) > 0.0) da2(j) = d_pooled(j);
    const Eigen::VectorXd a1 = c.a1.col(p);
    const Eigen::VectorXd h1 = a1.cwiseMax(0.0);
    d.w2.noalias() += da2 * h1.transpose();
    d.b2 += da2;
    dh1.noalias() = params.w2.transpose() * da2;
    da1 = dh1.cwiseProduct(relu_mask(a1));
    const Eigen::Vector3d x = points.row(p).transpose();
    d.w1.noalias() += da1 * x.transpose();
    d.b1 += da1;
    g.d_input.row(p) = (params.w1.transpose() * da1).transpose();
  }
  return g;
}

Tangent directional(const ClassifierParams& params, const ForwardRecord& record, const Points& direction) {
  const ForwardCache& c = record.cache;
  if (direction.rows() != c.a1.cols())
    throw Error(ErrorCode::kDimensionMismatch, "directional: direction has wrong point count");
  const auto h2 = params.w2.rows();
  Tangent t;
  t.pooled_dot = Eigen::VectorXd::Zero(h2);
  t.h1_dot.reserve(c.winners.size());
  for (int p : c.winners) {
    const Eigen::Vector3d v = direction.row(p).transpose();
    Eigen::VectorXd h1_dot = (params.w1 * v).cwiseProduct(relu_mask(c.a1.col(p)));
    const Eigen::VectorXd a2_dot = params.w2 * h1_dot;
    for (Eigen::Index j = 0; j < h2; ++j)
      if (c.argmax[static_cast<std::size_t>(j)] == p && c.a2(j, p) > 0.0) t.pooled_dot(j) = a2_dot(j);
    t.h1_dot.push_back(std::move(h1_dot));
  }
  t.h3_dot = (params.w3 * t.pooled_dot).cwiseProduct(relu_mask(c.a3));
  t.logits_dot = params.w4 * t.h3_dot;
  return t;
}

ClassifierParams tangent_param_gradient(const ClassifierParams& params, const ForwardRecord& record,
                                        const Points& direction, const Tangent& tangent,
                                        const Eigen::VectorXd& upstream) {
  const ForwardCache& c = record.cache;
  ClassifierParams d = ClassifierParams::zeros_like(params);
  d.w4.noalias() = upstream * tangent.h3_dot.transpose();
  const Eigen::VectorXd da3_dot = (params.w4.transpose() * upstream).cwiseProduct(relu_mask(c.a3));
  d.w3.noalias() = da3_dot * tangent.pooled_dot.transpose();
  const Eigen::VectorXd d_pooled_dot = params.w3.transpose() * da3_dot;

  const auto h2 = params.w2.rows();
  Eigen::VectorXd da2_dot(h2);
  for (std::size_t w = 0; w < c.winners.size(); ++w) {
    const int p = c.winners[w];
    da2_dot.setZero();
    for (Eigen::Index j = 0; j < h2; ++j)
      if (c.argmax[static_cast<std::size_t>(j)] == p && c.a2(j, p) > 0.0) da2_dot(j) = d_pooled_dot(j);
    d.w2.noalias() += da2_dot * tangent.h1_dot[w].transpose();
    const Eigen::VectorXd da1_dot = (params.w2.transpose() * da2_dot).cwiseProduct(relu_mask(c.a1.col(p)));
    const Eigen::Vector3d v = direction.row(p).transpose();
    d.w1.noalias() += da1_dot * v.transpose();
  }
  return d;
}

void save_checkpoint(const ClassifierParams& params, const std::filesystem::path& path) {
  binio::Writer w;
  w.magic("MIRN");
  w.u32(kCheckpointVersion);
  const NetworkDims dims = params.dims();
  w.u32(static_cast<std::uint32_t>(dims.h1));
  w.u32(static_cast<std::uint32_t>(dims.h2));
  w.u32(static_cast<std::uint32_t>(dims.h3));
  w.u32(static_cast<std::uint32_t>(params.classes()));
  w.f64s(params.flatten());
  w.write_file(path);
}

ClassifierParams load_checkpoint(const std::filesystem::path& path) {
  auto r = binio::Reader::from_file(path);
  if (!r.expect_magic("MIRN")) throw Error(ErrorCode::kBadMagic, path.string() + " is not a MIRN file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::kVersionMismatch, "MIRN version " + std::to_string(version) + " unsupported");
  NetworkDims dims;
  dims.h1 = static_cast<int>(r.u32());
  dims.h2 = static_cast<int>(r.u32());
  dims.h3 = static_cast<int>(r.u32());
  const int classes = static_cast<int>(r.u32());
  if (dims.h1 < 1 || dims.h2 < 1 || dims.h3 < 1 || classes < 1)
    throw Error(ErrorCode::kBadMagic, "MIRN header has zero dimension");
  ClassifierParams p = init_params(dims, classes, 0);
  if (r.remaining() != p.size() * 8) throw Error(ErrorCode::kBadMagic, "MIRN payload size mismatch");
  std::vector<double> flat(p.size());
  r.f64s(flat);
  p.assign(flat);
  return p;
}

}  // namespace shapemem

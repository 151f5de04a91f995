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

// Mini point classifier:
//
//   per point p:  h1_p = relu(W1 x_p + b1),  h2_p = relu(W2 h1_p + b2)
//   pooled:       f_j  = max_p h2_p[j]            (ties -> lowest p)
//   head:         h3   = relu(W3 f + b3),  logits = W4 h3 + b4
//
// All gradients are written out by hand. ReLU'(0) = 0.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "shapemem/geometry.hpp"

namespace shapemem {

struct NetworkDims {
  int h1 = 32;
  int h2 = 64;
  int h3 = 32;

  bool operator==(const NetworkDims&) const = default;
};

/// Also used as the gradient / optimizer-moment container.
struct ClassifierParams {
  Eigen::MatrixXd w1;  // h1 x 3
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // h2 x h1
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3;  // h3 x h2
  Eigen::VectorXd b3;
  Eigen::MatrixXd w4;  // C x h3
  Eigen::VectorXd b4;

  int classes() const { return static_cast<int>(w4.rows()); }
  NetworkDims dims() const {
    return {static_cast<int>(w1.rows()), static_cast<int>(w2.rows()), static_cast<int>(w3.rows())};
  }
  std::size_t size() const;

  /// Calls f(tensor) for each of the eight tensors in fixed order
  /// (w1, b1, w2, b2, w3, b3, w4, b4).
  template <typename F>
  void visit(F&& f) {
    f(w1); f(b1); f(w2); f(b2); f(w3); f(b3); f(w4); f(b4);
  }
  template <typename F>
  void visit(F&& f) const {
    f(w1); f(b1); f(w2); f(b2); f(w3); f(b3); f(w4); f(b4);
  }

  static ClassifierParams zeros_like(const ClassifierParams& p);

  ClassifierParams& operator+=(const ClassifierParams& o);
  ClassifierParams& operator*=(double s);
  bool all_finite() const;
  bool operator==(const ClassifierParams& o) const;  // exact

  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
};

/// Adds scale * src into dst tensor by tensor.
void axpy(double scale, const ClassifierParams& src, ClassifierParams& dst);

struct ForwardCache {
  Eigen::MatrixXd a1;        // h1 x n pre-activations
  Eigen::MatrixXd a2;        // h2 x n pre-activations
  Eigen::VectorXd pooled;    // h2
  std::vector<int> argmax;   // h2, winning point per feature
  Eigen::VectorXd a3;        // h3
  Eigen::VectorXd h3;        // h3
  std::vector<int> winners;  // distinct argmax points, ascending
};

struct ForwardRecord {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  ForwardCache cache;
};

struct GradientBundle {
  ClassifierParams d_params;
  Points d_input;
};

/// Weights ~ U(-s, s), s = sqrt(6 / (fan_in + fan_out)); biases 0. Each class
/// row r of the head is drawn from its own stream with s = sqrt(6 / (2 h3)),
/// so a head grown in steps equals one initialized at the final size.
ClassifierParams init_params(const NetworkDims& dims, int classes, std::uint64_t seed);

/// Throws kNonFinite on non-finite input or logits, kEmptySet on zero points.
ForwardRecord forward(const ClassifierParams& params, const Points& points);

/// Reverse-mode gradient of <upstream, logits> w.r.t. parameters and input.
GradientBundle backward(const ClassifierParams& params, const Points& points, const ForwardRecord& record,
                        const Eigen::VectorXd& d_logits);

/// Appends head rows [C, new_C) using init_params' per-row rule. new_C == C is
/// a no-op; new_C < C throws kShrinkNotAllowed.
ClassifierParams expand_head(const ClassifierParams& params, int new_C, std::uint64_t seed);

/// Numerically stable softmax (max subtracted).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// ---------------------------------------------------------------------------
// Directional (tangent) pass: the derivative of the logits along an input
// direction V, with the activation pattern of `record` held fixed, and the
// parameter gradient of <u, d logits/dV>. Together with a logit-space
// Hessian-vector product these give exact mixed second derivatives
// d/dtheta <dL/dZ, V>.

struct Tangent {
  Eigen::VectorXd logits_dot;               // C
  Eigen::VectorXd pooled_dot;               // h2
  Eigen::VectorXd h3_dot;                   // h3
  std::vector<Eigen::VectorXd> h1_dot;      // per winner point
};

Tangent directional(const ClassifierParams& params, const ForwardRecord& record, const Points& direction);

/// Gradient w.r.t. parameters of <upstream, logits_dot> with the activation
/// pattern fixed. Biases receive zero.
ClassifierParams tangent_param_gradient(const ClassifierParams& params, const ForwardRecord& record,
                                        const Points& direction, const Tangent& tangent,
                                        const Eigen::VectorXd& upstream);

// "MIRN" checkpoint: magic, u32 version, u32 h1, h2, h3, C, then
// w1, b1, w2, b2, w3, b3, w4, b4 as little-endian f64 (matrices row-major).
constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ClassifierParams& params, const std::filesystem::path& path);
ClassifierParams load_checkpoint(const std::filesystem::path& path);

}  // namespace shapemem

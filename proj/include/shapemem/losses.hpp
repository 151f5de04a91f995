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

// Training objectives. New-class samples contribute cross-entropy plus a
// scaled distillation term against the previous model; replayed old-class
// samples contribute a focal loss plus the mode-gradient penalty
//
//   lambda * sum_i <dL_focal/dZ, V_i>^2
//
// which pushes the loss to be flat along the stored modes of variation V_i.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapemem/network.hpp"
#include "shapemem/shape_model.hpp"

namespace shapemem {

constexpr double kProbFloor = 1e-12;

/// How the parameter gradient of the mode penalty is obtained.
enum class GmrGradient {
  kExact,             // forward-over-reverse mixed second derivative
  kFiniteDifference,  // central difference of dL/dtheta along +-h V_i
};

struct LossConfig {
  double gamma = 2.0;
  double alpha_t = 1.0;
  double lambda = 0.01;
  double kd_factor = 0.1;
  double temperature = 2.0;
  double fd_step = 1e-4;
  GmrGradient gmr_gradient = GmrGradient::kExact;

  /// Throws kConfig when an invariant is violated.
  void validate() const;
};

// Probability floor applies to the value only; gradients are those of the
// unfloored expression so saturated samples keep learning.
double cross_entropy(const Eigen::VectorXd& probs, int label);
double focal_loss(const Eigen::VectorXd& probs, int label, double gamma, double alpha_t);

/// T^2 * KL(softmax(teacher[:old_C]/T) || softmax(student[:old_C]/T)).
double kd_loss(const Eigen::VectorXd& student_logits, const Eigen::VectorXd& teacher_logits, int old_C,
               double temperature);

/// lambda * sum_i <d_input, V_i>_F^2.
double gmr_penalty(const Points& d_input, std::span<const Points> modes, double lambda);

// Logit-space derivatives.
Eigen::VectorXd cross_entropy_grad(const Eigen::VectorXd& probs, int label);
Eigen::VectorXd focal_grad(const Eigen::VectorXd& probs, int label, double gamma, double alpha_t);
/// Hessian of the focal loss w.r.t. logits applied to `direction`.
Eigen::VectorXd focal_hvp(const Eigen::VectorXd& probs, int label, double gamma, double alpha_t,
                          const Eigen::VectorXd& direction);
Eigen::VectorXd kd_grad(const Eigen::VectorXd& student_logits, const Eigen::VectorXd& teacher_logits, int old_C,
                        double temperature);

/// Focal loss plus mode penalty on one replayed sample.
struct ReplayTerm {
  double focal = 0.0;
  double penalty = 0.0;
  ClassifierParams d_focal;
  ClassifierParams d_penalty;
};

ReplayTerm replay_term(const ClassifierParams& params, const Points& sample, std::span<const Points> modes,
                       int label, const LossConfig& cfg);

/// Parameter gradient of the mode penalty alone. Throws kNonFinite.
ClassifierParams gmr_param_gradient(const ClassifierParams& params, const GeneratedSample& sample,
                                    std::span<const Points> modes, int label, const LossConfig& cfg);

struct LabeledCloud {
  const Points* points = nullptr;
  int label = 0;  // head index
};

struct ReplayItem {
  Points points;
  int label = 0;                              // head index
  const std::vector<Points>* modes = nullptr;  // empty for verbatim exemplars
};

struct TotalLoss {
  double value = 0.0;
  double ce = 0.0;
  double kd = 0.0;      // already multiplied by kd_factor
  double focal = 0.0;
  double gmr = 0.0;
  ClassifierParams d_params;  // gradient of `value` (a sum, not a mean)
  std::size_t samples = 0;
};

/// value = sum_new (CE + kd_factor * KD) + sum_replay (focal + penalty).
/// KD is applied when `teacher` is non-null, over its class count.
TotalLoss total_loss(const ClassifierParams& params, const ClassifierParams* teacher,
                     std::span<const LabeledCloud> batch, std::span<const ReplayItem> replay, const LossConfig& cfg);

}  // namespace shapemem

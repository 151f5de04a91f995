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

#include "shapemem/losses.hpp"

#include <algorithm>
#include <cmath>

#include "shapemem/error.hpp"

namespace shapemem {

namespace {

void check_label(const Eigen::VectorXd& probs, int label) {
  if (label < 0 || label >= probs.size())
    throw Error(ErrorCode::kBadLabel,
                "label " + std::to_string(label) + " outside [0, " + std::to_string(probs.size()) + ")");
}

double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

// coef * q^e * mult, taken as 0 whenever coef or mult is 0 and q^e with q = 0
// for e < 0 (the p == 1 corner, where the factor it multiplies vanishes).
double term(double coef, double q, double e, double mult) {
  if (coef == 0.0 || mult == 0.0) return 0.0;
  if (e == 0.0) return coef * mult;
  if (q == 0.0) return 0.0;
  return coef * std::pow(q, e) * mult;
}

// With L(p) = -alpha (1-p)^gamma log p and p = softmax(z)_c:
//   dL/dz = A(p) (e_c - P),  A(p) = p L'(p).
double focal_scale(double p, double gamma, double alpha_t) {
  const double q = 1.0 - p;
  const double l = floored_log(p);
  return -alpha_t * (term(1.0, q, gamma, 1.0) - term(gamma * p, q, gamma - 1.0, l));
}

double focal_scale_derivative(double p, double gamma, double alpha_t) {
  const double q = 1.0 - p;
  const double l = floored_log(p);
  return -alpha_t * (-term(2.0 * gamma, q, gamma - 1.0, 1.0) - term(gamma, q, gamma - 1.0, l) +
                     term(gamma * (gamma - 1.0) * p, q, gamma - 2.0, l));
}

double frobenius(const Points& a, const Points& b) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()).dot(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
}

void check_modes(const Points& reference, std::span<const Points> modes) {
  for (const auto& v : modes)
    if (v.rows() != reference.rows())
      throw Error(ErrorCode::kDimensionMismatch, "mode has " + std::to_string(v.rows()) + " points, sample has " +
                                                     std::to_string(reference.rows()));
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  const double lse = top + std::log((z.array() - top).exp().sum());
  return z.array() - lse;
}

ClassifierParams focal_param_gradient_at(const ClassifierParams& params, const Points& points, int label,
                                         const LossConfig& cfg) {
  const ForwardRecord rec = forward(params, points);
  return backward(params, points, rec, focal_grad(rec.probs, label, cfg.gamma, cfg.alpha_t)).d_params;
}

// Penalty gradient given the forward record and exact input gradient at the sample.
ClassifierParams penalty_gradient(const ClassifierParams& params, const Points& points, const ForwardRecord& rec,
                                  const Eigen::VectorXd& upstream, const Points& d_input,
                                  std::span<const Points> modes, int label, const LossConfig& cfg) {
  ClassifierParams d = ClassifierParams::zeros_like(params);
  if (cfg.lambda == 0.0 || modes.empty()) return d;

  if (cfg.gmr_gradient == GmrGradient::kExact) {
    // d/dtheta g_i with g_i = <u, dz/dV_i>: the logits' tangent is pulled back
    // through the focal Hessian (primal path) and through the weights that
    // carry the tangent (tangent path).
    Eigen::VectorXd primal_upstream = Eigen::VectorXd::Zero(rec.logits.size());
    for (const auto& v : modes) {
      const double g = frobenius(d_input, v);
      if (g == 0.0) continue;
      const double w = 2.0 * cfg.lambda * g;
      const Tangent t = directional(params, rec, v);
      primal_upstream += w * focal_hvp(rec.probs, label, cfg.gamma, cfg.alpha_t, t.logits_dot);
      axpy(w, tangent_param_gradient(params, rec, v, t, upstream), d);
    }
    d += backward(params, points, rec, primal_upstream).d_params;
  } else {
    const double h = cfg.fd_step;
    for (const auto& v : modes) {
      const double g = frobenius(d_input, v);
      const Points plus = points + h * v;
      const Points minus = points - h * v;
      ClassifierParams mixed = focal_param_gradient_at(params, plus, label, cfg);
      axpy(-1.0, focal_param_gradient_at(params, minus, label, cfg), mixed);
      axpy(2.0 * cfg.lambda * g / (2.0 * h), mixed, d);
    }
  }
  if (!d.all_finite()) throw Error(ErrorCode::kNonFinite, "mode penalty gradient is not finite");
  return d;
}

}  // namespace

void LossConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (!(gamma >= 0.0)) fail("gamma must be >= 0");
  if (!(alpha_t > 0.0)) fail("alpha_t must be > 0");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(kd_factor >= 0.0)) fail("kd_factor must be >= 0");
  if (!(temperature > 0.0)) fail("temperature must be > 0");
  if (!(fd_step > 0.0)) fail("fd_step must be > 0");
}

double cross_entropy(const Eigen::VectorXd& probs, int label) {
  check_label(probs, label);
  return -floored_log(probs(label));
}

double focal_loss(const Eigen::VectorXd& probs, int label, double gamma, double alpha_t) {
  check_label(probs, label);
  const double p = probs(label);
  return -alpha_t * term(1.0, 1.0 - p, gamma, 1.0) * floored_log(p);
}

double kd_loss(const Eigen::VectorXd& student_logits, const Eigen::VectorXd& teacher_logits, int old_C,
               double temperature) {
  if (old_C < 1 || old_C > student_logits.size() || old_C > teacher_logits.size())
    throw Error(ErrorCode::kDimensionMismatch, "kd_loss: old_C=" + std::to_string(old_C) + " out of range");
  const Eigen::VectorXd log_qs = log_softmax(student_logits.head(old_C) / temperature);
  const Eigen::VectorXd log_qt = log_softmax(teacher_logits.head(old_C) / temperature);
  const double kl = (log_qt.array().exp() * (log_qt - log_qs).array()).sum();
  return temperature * temperature * kl;
}

double gmr_penalty(const Points& d_input, std::span<const Points> modes, double lambda) {
  check_modes(d_input, modes);
  double sum = 0.0;
  for (const auto& v : modes) {
    const double g = frobenius(d_input, v);
    sum += g * g;
  }
  return lambda * sum;
}

Eigen::VectorXd cross_entropy_grad(const Eigen::VectorXd& probs, int label) {
  check_label(probs, label);
  Eigen::VectorXd g = probs;
  g(label) -= 1.0;
  return g;
}

Eigen::VectorXd focal_grad(const Eigen::VectorXd& probs, int label, double gamma, double alpha_t) {
  check_label(probs, label);
  const double a = focal_scale(probs(label), gamma, alpha_t);
  Eigen::VectorXd g = -a * probs;
  g(label) += a;
  return g;
}

Eigen::VectorXd focal_hvp(const Eigen::VectorXd& probs, int label, double gamma, double alpha_t,
                          const Eigen::VectorXd& direction) {
  check_label(probs, label);
  const double p = probs(label);
  const double a = focal_scale(p, gamma, alpha_t);
  const double a_prime = focal_scale_derivative(p, gamma, alpha_t);
  const double mean_dir = probs.dot(direction);
  const double p_dot = p * (direction(label) - mean_dir);
  const Eigen::VectorXd probs_dot = probs.cwiseProduct((direction.array() - mean_dir).matrix());
  // d/dt [A(p)(e_c - P)] = A'(p) p_dot (e_c - P) - A(p) P_dot
  Eigen::VectorXd out = -(a_prime * p_dot) * probs - a * probs_dot;
  out(label) += a_prime * p_dot;
  return out;
}

Eigen::VectorXd kd_grad(const Eigen::VectorXd& student_logits, const Eigen::VectorXd& teacher_logits, int old_C,
                        double temperature) {
  if (old_C < 1 || old_C > student_logits.size() || old_C > teacher_logits.size())
    throw Error(ErrorCode::kDimensionMismatch, "kd_grad: old_C=" + std::to_string(old_C) + " out of range");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(student_logits.size());
  g.head(old_C) = temperature * (softmax(student_logits.head(old_C) / temperature) -
                                 softmax(teacher_logits.head(old_C) / temperature));
  return g;
}

ReplayTerm replay_term(const ClassifierParams& params, const Points& sample, std::span<const Points> modes,
                       int label, const LossConfig& cfg) {
  check_modes(sample, modes);
  const ForwardRecord rec = forward(params, sample);
  const Eigen::VectorXd u = focal_grad(rec.probs, label, cfg.gamma, cfg.alpha_t);
  GradientBundle g = backward(params, sample, rec, u);
  ReplayTerm out;
  out.focal = focal_loss(rec.probs, label, cfg.gamma, cfg.alpha_t);
  out.penalty = gmr_penalty(g.d_input, modes, cfg.lambda);
  out.d_penalty = penalty_gradient(params, sample, rec, u, g.d_input, modes, label, cfg);
  out.d_focal = std::move(g.d_params);
  return out;
}

ClassifierParams gmr_param_gradient(const ClassifierParams& params, const GeneratedSample& sample,
                                    std::span<const Points> modes, int label, const LossConfig& cfg) {
  return replay_term(params, sample.points, modes, label, cfg).d_penalty;
}

TotalLoss total_loss(const ClassifierParams& params, const ClassifierParams* teacher,
                     std::span<const LabeledCloud> batch, std::span<const ReplayItem> replay, const LossConfig& cfg) {
  TotalLoss out;
  out.d_params = ClassifierParams::zeros_like(params);
  const int old_C = teacher != nullptr ? teacher->classes() : 0;

  for (const auto& item : batch) {
    const ForwardRecord rec = forward(params, *item.points);
    Eigen::VectorXd upstream = cross_entropy_grad(rec.probs, item.label);
    out.ce += cross_entropy(rec.probs, item.label);
    if (teacher != nullptr && cfg.kd_factor != 0.0) {
      const ForwardRecord t = forward(*teacher, *item.points);
      out.kd += cfg.kd_factor * kd_loss(rec.logits, t.logits, old_C, cfg.temperature);
      upstream += cfg.kd_factor * kd_grad(rec.logits, t.logits, old_C, cfg.temperature);
    }
    out.d_params += backward(params, *item.points, rec, upstream).d_params;
  }

  for (const auto& item : replay) {
    const std::span<const Points> modes =
        item.modes != nullptr ? std::span<const Points>(*item.modes) : std::span<const Points>();
    ReplayTerm r = replay_term(params, item.points, modes, item.label, cfg);
    out.focal += r.focal;
    out.gmr += r.penalty;
    out.d_params += r.d_focal;
    out.d_params += r.d_penalty;
  }

  out.value = out.ce + out.kd + out.focal + out.gmr;
  out.samples = batch.size() + replay.size();
  if (!std::isfinite(out.value) || !out.d_params.all_finite())
    throw Error(ErrorCode::kNonFinite, "total_loss: non-finite value or gradient");
  return out;
}

}  // namespace shapemem

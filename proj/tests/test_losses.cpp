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

#include "helpers.hpp"
#include "shapemem/error.hpp"
#include "shapemem/losses.hpp"

using namespace shapemem;

namespace {

const NetworkDims kTiny{4, 5, 3};

Eigen::VectorXd probs_of(std::initializer_list<double> z) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z.size()));
  Eigen::Index i = 0;
  for (double x : z) v(i++) = x;
  return v;
}

Eigen::VectorXd random_logits(Rng& rng, int c) {
  Eigen::VectorXd z(c);
  for (int i = 0; i < c; ++i) z(i) = 2.0 * rng.normal();
  return z;
}

// Central differences of f: R^C -> R.
Eigen::VectorXd fd_logits(const Eigen::VectorXd& z, const std::function<double(const Eigen::VectorXd&)>& f,
                          double h = 1e-6) {
  Eigen::VectorXd g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Eigen::VectorXd a = z, b = z;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

double penalty_at(const ClassifierParams& p, const Points& x, std::span<const Points> modes, int label,
                  const LossConfig& cfg) {
  return replay_term(p, x, modes, label, cfg).penalty;
}

}  // namespace

TEST_CASE("cross entropy values") {
  CHECK(cross_entropy(probs_of({0.0, 1.0}), 1) == 0.0);
  CHECK(cross_entropy(probs_of({0.25, 0.25, 0.25, 0.25}), 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(cross_entropy(probs_of({0.5, 0.5}), 0) == doctest::Approx(0.693147180559945).epsilon(1e-14));
  // floored at 1e-12
  CHECK(cross_entropy(probs_of({1.0, 0.0}), 1) == doctest::Approx(-std::log(1e-12)).epsilon(1e-15));
  CHECK_THROWS_AS(cross_entropy(probs_of({1.0}), 1), Error);
}

TEST_CASE("focal loss values") {
  CHECK(focal_loss(probs_of({0.5, 0.5}), 0, 2.0, 0.25) == doctest::Approx(0.0433216987849966).epsilon(1e-13));
  for (double gamma : {0.0, 0.5, 2.0, 5.0}) CHECK(focal_loss(probs_of({0.0, 1.0}), 1, gamma, 0.7) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd p = softmax(random_logits(rng, 5));
    CHECK(std::abs(focal_loss(p, 3, 0.0, 0.6) - 0.6 * cross_entropy(p, 3)) <= 1e-12);
  }
}

TEST_CASE("distillation values") {
  Rng rng(2);
  const Eigen::VectorXd t = random_logits(rng, 4);
  CHECK(kd_loss(t, t, 4, 2.0) == 0.0);
  for (int i = 0; i < 20; ++i) CHECK(kd_loss(random_logits(rng, 5), random_logits(rng, 5), 3, 1.5) >= 0.0);
  // KL(softmax(2,0) || softmax(0,2)) = 2 tanh(1)
  CHECK(kd_loss(probs_of({0.0, 2.0}), probs_of({2.0, 0.0}), 2, 1.0) ==
        doctest::Approx(1.5231883119115297).epsilon(1e-14));
  CHECK(2.0 * std::tanh(1.0) == doctest::Approx(1.5231883119115297).epsilon(1e-15));
  // only the first old_C logits take part
  CHECK(kd_loss(probs_of({1.0, 2.0, 9.0}), probs_of({1.0, 2.0, -4.0}), 2, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(kd_loss(t, t, 5, 1.0), Error);
}

TEST_CASE("mode penalty values") {
  Rng rng(3);
  const auto modes = testing::random_orthonormal_modes(rng, 5, 2);
  CHECK(gmr_penalty(modes[0], modes, 0.3) == doctest::Approx(0.3).epsilon(1e-14));

  // d_input orthogonal to both modes
  const auto basis = testing::random_orthonormal_modes(rng, 5, 3);
  const std::vector<Points> two = {basis[0], basis[1]};
  CHECK(std::abs(gmr_penalty(basis[2], two, 1.0)) <= 1e-28);

  const Points d = testing::random_points(rng, 5);
  double want = 0.0;
  for (const auto& v : modes) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i)
      for (int j = 0; j < 3; ++j) g += d(i, j) * v(i, j);
    want += g * g;
  }
  CHECK(gmr_penalty(d, modes, 0.01) == doctest::Approx(0.01 * want).epsilon(1e-13));
  CHECK(gmr_penalty(d, modes, 0.02) == 2.0 * gmr_penalty(d, modes, 0.01));
}

TEST_CASE("logit gradients match central differences") {
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd z = random_logits(rng, 4);
    const int label = static_cast<int>(rng.below(4));
    const Eigen::VectorXd ce = fd_logits(z, [&](const Eigen::VectorXd& y) { return cross_entropy(softmax(y), label); });
    CHECK((cross_entropy_grad(softmax(z), label) - ce).cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::VectorXd fl =
        fd_logits(z, [&](const Eigen::VectorXd& y) { return focal_loss(softmax(y), label, 2.0, 0.5); });
    CHECK((focal_grad(softmax(z), label, 2.0, 0.5) - fl).cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::VectorXd t = random_logits(rng, 4);
    const Eigen::VectorXd kd = fd_logits(z, [&](const Eigen::VectorXd& y) { return kd_loss(y, t, 3, 2.0); });
    CHECK((kd_grad(z, t, 3, 2.0) - kd).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("focal Hessian-vector product matches differences of the gradient") {
  Rng rng(5);
  for (double gamma : {0.0, 1.0, 2.0, 3.5}) {
    const Eigen::VectorXd z = random_logits(rng, 5);
    const Eigen::VectorXd dir = random_logits(rng, 5);
    const double h = 1e-6;
    const Eigen::VectorXd fd =
        (focal_grad(softmax(z + h * dir), 1, gamma, 0.8) - focal_grad(softmax(z - h * dir), 1, gamma, 0.8)) / (2 * h);
    CHECK((focal_hvp(softmax(z), 1, gamma, 0.8, dir) - fd).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("mode penalty gradient matches differences of the penalty over parameters") {
  Rng rng(6);
  for (GmrGradient how : {GmrGradient::kExact, GmrGradient::kFiniteDifference}) {
    LossConfig cfg;
    cfg.lambda = 0.5;
    cfg.gmr_gradient = how;
    for (int trial = 0; trial < 3; ++trial) {
      const ClassifierParams p = testing::random_params(rng, kTiny, 3);
      const Points x = testing::random_points(rng, 6);
      const auto modes = testing::random_orthonormal_modes(rng, 6, 2);
      const int label = static_cast<int>(rng.below(3));
      GeneratedSample s{x, "c", {}, 0.2};
      const auto got = gmr_param_gradient(p, s, modes, label, cfg).flatten();
      const auto fd = testing::fd_param_gradient(
          p, [&](const ClassifierParams& q) { return penalty_at(q, x, modes, label, cfg); }, 1e-5);
      CHECK(testing::rel_error(got, fd) <= 1e-3);
    }
  }
}

TEST_CASE("mode penalty gradient vanishes without weight or alignment") {
  Rng rng(7);
  LossConfig cfg;
  ClassifierParams p;
  Points x, d;
  do {  // skip draws whose ReLUs are all dead (dL/dZ == 0)
    p = testing::random_params(rng, kTiny, 3);
    x = testing::random_points(rng, 6);
    const ForwardRecord rec = forward(p, x);
    d = backward(p, x, rec, focal_grad(rec.probs, 1, cfg.gamma, cfg.alpha_t)).d_input;
  } while (d.norm() == 0.0);
  GeneratedSample s{x, "c", {}, 0.2};
  cfg.lambda = 0.0;
  const auto modes = testing::random_orthonormal_modes(rng, 6, 2);
  for (double v : gmr_param_gradient(p, s, modes, 1, cfg).flatten()) CHECK(v == 0.0);

  // modes orthogonal to dL/dZ: every g_i is 0, so the exact path adds nothing
  cfg.lambda = 1.0;
  const Eigen::Map<const Eigen::VectorXd> dv(d.data(), d.size());
  std::vector<Points> ortho;
  for (auto v : testing::random_orthonormal_modes(rng, 6, 2)) {
    Eigen::Map<Eigen::VectorXd> vv(v.data(), v.size());
    vv -= vv.dot(dv) / dv.squaredNorm() * dv;
    for (const auto& o : ortho) {
      const Eigen::Map<const Eigen::VectorXd> ov(o.data(), o.size());
      vv -= vv.dot(ov) * ov;
    }
    vv.normalize();
    ortho.push_back(v);
  }
  const auto g = gmr_param_gradient(p, s, ortho, 1, cfg).flatten();
  double biggest = 0.0;
  for (double v : g) biggest = std::max(biggest, std::abs(v));
  CHECK(biggest <= 1e-12);
}

TEST_CASE("total loss composes its terms") {
  Rng rng(8);
  const ClassifierParams p = testing::random_params(rng, kTiny, 4);
  const ClassifierParams teacher = testing::random_params(rng, kTiny, 2);
  const Points a = testing::random_points(rng, 6), b = testing::random_points(rng, 6);
  const auto modes = testing::random_orthonormal_modes(rng, 6, 2);
  const std::vector<LabeledCloud> batch = {{&a, 2}, {&b, 3}};
  const std::vector<ReplayItem> replay = {{testing::random_points(rng, 6), 0, &modes}};
  LossConfig cfg;
  cfg.lambda = 0.3;

  SUBCASE("first session is cross-entropy only") {
    const TotalLoss t = total_loss(p, nullptr, batch, {}, cfg);
    const double want = cross_entropy(forward(p, a).probs, 2) + cross_entropy(forward(p, b).probs, 3);
    CHECK(t.value == doctest::Approx(want).epsilon(1e-15));
    CHECK(t.kd == 0.0);
    CHECK(t.samples == 2);
  }
  SUBCASE("no penalty and no distillation") {
    LossConfig plain = cfg;
    plain.lambda = 0.0;
    plain.kd_factor = 0.0;
    const TotalLoss t = total_loss(p, &teacher, batch, replay, plain);
    const double want = cross_entropy(forward(p, a).probs, 2) + cross_entropy(forward(p, b).probs, 3) +
                        focal_loss(forward(p, replay[0].points).probs, 0, plain.gamma, plain.alpha_t);
    CHECK(t.value == doctest::Approx(want).epsilon(1e-14));
  }
  SUBCASE("one new and one replay sample") {
    const std::vector<LabeledCloud> one = {{&a, 2}};
    const TotalLoss t = total_loss(p, &teacher, one, replay, cfg);
    const ForwardRecord ra = forward(p, a);
    const double kd = cfg.kd_factor * kd_loss(ra.logits, forward(teacher, a).logits, 2, cfg.temperature);
    const ReplayTerm r = replay_term(p, replay[0].points, modes, 0, cfg);
    CHECK(t.ce == doctest::Approx(cross_entropy(ra.probs, 2)).epsilon(1e-15));
    CHECK(t.kd == doctest::Approx(kd).epsilon(1e-15));
    CHECK(t.focal == doctest::Approx(r.focal).epsilon(1e-15));
    CHECK(t.gmr == doctest::Approx(r.penalty).epsilon(1e-15));
    CHECK(t.value == doctest::Approx(cross_entropy(ra.probs, 2) + kd + r.focal + r.penalty).epsilon(1e-14));

    const auto fd = testing::fd_param_gradient(
        p, [&](const ClassifierParams& q) { return total_loss(q, &teacher, one, replay, cfg).value; }, 1e-5);
    CHECK(testing::rel_error(t.d_params.flatten(), fd) <= 1e-4);
  }
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = LossConfig{};
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = LossConfig{};
  cfg.fd_step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

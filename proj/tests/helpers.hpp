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

// Shared fixtures for unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "shapemem/geometry.hpp"
#include "shapemem/network.hpp"
#include "shapemem/rng.hpp"

namespace shapemem::testing {

inline Points random_points(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Points p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) p(i, d) = scale * rng.uniform(-1.0, 1.0);
  return p;
}

/// Parameters with every entry ~ U(-scale, scale), biases included.
inline ClassifierParams random_params(Rng& rng, const NetworkDims& dims, int classes, double scale = 0.8) {
  ClassifierParams p = init_params(dims, classes, rng.next_u64());
  p.visit([&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
  });
  return p;
}

/// Orthonormal n x 3 directions (as 3n-vectors) from Gram-Schmidt on randoms.
inline std::vector<Points> random_orthonormal_modes(Rng& rng, Eigen::Index n, int k) {
  Eigen::MatrixXd raw(3 * n, k);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, k);
  std::vector<Points> modes;
  for (int j = 0; j < k; ++j) modes.push_back(Eigen::Map<const Points>(q.col(j).data(), n, 3));
  return modes;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor)
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double diff = 0.0, mag = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    mag = std::max(mag, std::abs(b[i]));
  }
  return diff / mag;
}

/// Central differences of f over every parameter entry.
inline std::vector<double> fd_param_gradient(const ClassifierParams& params,
                                             const std::function<double(const ClassifierParams&)>& f, double h) {
  std::vector<double> flat = params.flatten();
  std::vector<double> grad(flat.size());
  ClassifierParams probe = params;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    probe.assign(flat);
    const double up = f(probe);
    flat[i] = keep - h;
    probe.assign(flat);
    const double down = f(probe);
    flat[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline std::vector<double> fd_input_gradient(const Points& x, const std::function<double(const Points&)>& f,
                                             double h) {
  std::vector<double> grad(static_cast<std::size_t>(x.size()));
  Points probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = probe.data()[i];
    probe.data()[i] = keep + h;
    const double up = f(probe);
    probe.data()[i] = keep - h;
    const double down = f(probe);
    probe.data()[i] = keep;
    grad[static_cast<std::size_t>(i)] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline std::vector<double> as_vector(const Points& p) { return {p.data(), p.data() + p.size()}; }

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("shapemem_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace shapemem::testing

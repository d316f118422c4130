// Copyright 2026 The milfuse Authors
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

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "milfuse/init.hpp"

using namespace milfuse;

namespace {

// Gram matrix of the K branch columns of class c.
Eigen::MatrixXd class_gram(const std::vector<Eigen::MatrixXd>& m, int c) {
  Eigen::MatrixXd q(m[0].rows(), static_cast<Eigen::Index>(m.size()));
  for (std::size_t k = 0; k < m.size(); ++k) q.col(static_cast<Eigen::Index>(k)) = m[k].col(c);
  return q.transpose() * q;
}

}  // namespace

TEST_CASE("orthogonal init examples") {
  const auto one = orthogonal_init(7, 3, 1, 1);
  REQUIRE(one.size() == 1);
  for (int c = 0; c < 3; ++c) CHECK(one[0].col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));

  const auto two = orthogonal_init(4, 3, 2, 2);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(two[0].col(c).dot(two[1].col(c))) < 1e-12);

  CHECK_THROWS_AS(orthogonal_init(3, 2, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(orthogonal_init(0, 2, 1, 0), std::invalid_argument);
}

TEST_CASE("orthogonal init gram matrix is the identity") {
  for (int l : {1, 2, 3, 8, 17, 32})
    for (int k = 1; k <= std::min(l, 8); ++k) {
      const auto m = orthogonal_init(l, 3, k, 100 + l * 10 + k);
      for (int c = 0; c < 3; ++c) {
        const Eigen::MatrixXd g = class_gram(m, c);
        CHECK((g - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
}

TEST_CASE("orthogonal init with K = l spans the space") {
  const auto m = orthogonal_init(5, 2, 5, 9);
  const Eigen::MatrixXd g = class_gram(m, 1);
  CHECK((g - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("init determinism and seed sensitivity") {
  CHECK(orthogonal_init(8, 4, 3, 5) == orthogonal_init(8, 4, 3, 5));
  double dist = 0.0;
  const auto a = orthogonal_init(8, 4, 3, 5), b = orthogonal_init(8, 4, 3, 6);
  for (int k = 0; k < 3; ++k) dist += (a[k] - b[k]).norm();
  CHECK(dist > 0.0);
  CHECK(gaussian_init(8, 4, 3, 0.01, 5) == gaussian_init(8, 4, 3, 0.01, 5));
  CHECK(gaussian_init(8, 4, 3, 0.01, 5) != gaussian_init(8, 4, 3, 0.01, 6));
}

TEST_CASE("gaussian init statistics") {
  const double sd = 0.01;
  const auto m = gaussian_init(500, 200, 1, sd, 42);
  const Eigen::MatrixXd& w = m[0];
  REQUIRE(w.size() == 100000);
  const double mean = w.mean();
  CHECK(std::abs(mean) < 5.0 * sd / std::sqrt(1e5));
  const double var = (w.array() - mean).square().sum() / double(w.size() - 1);
  CHECK(std::sqrt(var) == doctest::Approx(sd).epsilon(0.02));
  // Branches use different streams.
  const auto two = gaussian_init(10, 3, 2, sd, 1);
  CHECK(two[0] != two[1]);
}

TEST_CASE("gaussian init rejects non-positive std") {
  CHECK_THROWS_AS(gaussian_init(4, 2, 1, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_init(4, 2, 1, -1.0, 0), std::invalid_argument);
  InitSpec spec;
  spec.gaussian_std = 0.0;
  CHECK_THROWS_AS(initialize(4, 2, 1, 0, spec), std::invalid_argument);
}

TEST_CASE("initialize wires strategies and zero biases") {
  InitSpec spec{InitStrategy::orthogonal, 0.01, 3};
  const ModelParams p = initialize(6, 3, 2, 2, spec);
  CHECK(p.num_branches() == 2);
  CHECK(p.num_stages() == 2);
  CHECK(p.refine[0].outputs() == 4);
  CHECK(p.det[0].weight == orthogonal_init(6, 3, 2, 3)[0]);
  CHECK(p.det[1].weight == orthogonal_init(6, 3, 2, 3)[1]);
  // Classification weights stay Gaussian under either strategy.
  InitSpec g = spec;
  g.strategy = InitStrategy::gaussian;
  const ModelParams q = initialize(6, 3, 2, 2, g);
  CHECK(p.cls == q.cls);
  CHECK(p.refine == q.refine);
  CHECK(p.det != q.det);
  CHECK(p.cls.bias.isZero());
  for (const auto& d : p.det) CHECK(d.bias.isZero());
  for (const auto& r : p.refine) CHECK(r.bias.isZero());
}

TEST_CASE("init strategy names") {
  CHECK(to_string(InitStrategy::orthogonal) == "orthogonal");
  CHECK(parse_init_strategy("gaussian") == InitStrategy::gaussian);
  CHECK_THROWS_AS(parse_init_strategy("xavier"), std::invalid_argument);
}

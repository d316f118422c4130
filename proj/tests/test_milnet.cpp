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
#include "milfuse/milnet.hpp"
#include "test_support.hpp"

using namespace milfuse;

namespace {

ProposalBag bag_with(int l, int c, int n, std::uint64_t seed) {
  Rng rng(seed);
  return testing::random_bag(rng, l, c, n);
}

}  // namespace

TEST_CASE("softmax helpers") {
  Eigen::MatrixXd logits(2, 1);
  logits << std::log(3.0), 0.0;
  const Eigen::MatrixXd col = softmax_columns(logits);
  CHECK(col(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(col(1, 0) == doctest::Approx(0.25).epsilon(1e-15));

  Eigen::MatrixXd row_logits(1, 2);
  row_logits << 0.0, std::log(9.0);
  const Eigen::MatrixXd row = softmax_rows(row_logits);
  CHECK(row(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(row(0, 1) == doctest::Approx(0.9).epsilon(1e-15));

  // Large logits stay finite thanks to max subtraction.
  Eigen::MatrixXd big(2, 1);
  big << 1000.0, 999.0;
  const Eigen::MatrixXd s = softmax_columns(big);
  CHECK(std::isfinite(s(0, 0)));
  CHECK(s.sum() == doctest::Approx(1.0));

  Eigen::MatrixXf f = Eigen::MatrixXf::Zero(3, 2);
  CHECK(softmax_columns(f)(1, 1) == doctest::Approx(1.0f / 3.0f));
}

TEST_CASE("softmax shift invariance") {
  Rng rng(1);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 4, 5);
  Eigen::MatrixXd shifted_col = x;
  shifted_col.col(2).array() += 7.0;
  CHECK((softmax_columns(shifted_col) - softmax_columns(x)).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::MatrixXd shifted_row = x;
  shifted_row.row(1).array() -= 7.0;
  CHECK((softmax_rows(shifted_row) - softmax_rows(x)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward with zero weights is uniform") {
  const ProposalBag bag = bag_with(5, 3, 4, 2);
  const ModelParams p = ModelParams::zeros(5, 3, 1, 0);
  const ScoreMatrix cls = forward_cls(bag.features, p);
  const ScoreMatrix det = forward_det(bag.features, p, 0);
  CHECK(cls.kind == ScoreKind::softmax_cls);
  CHECK(det.kind == ScoreKind::softmax_det);
  CHECK((cls.values.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  CHECK((det.values.array() - 0.25).abs().maxCoeff() < 1e-15);
  const ScoreMatrix coupled = couple(cls, det);
  CHECK((coupled.values.array() - 1.0 / 12.0).abs().maxCoeff() < 1e-15);
  const Eigen::VectorXd p_img = image_scores(coupled);
  CHECK((p_img.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("single proposal") {
  const ProposalBag bag = bag_with(4, 3, 1, 3);
  Rng rng(9);
  const ModelParams p = testing::random_params(rng, 4, 3, 2, 0);
  const ScoreMatrix cls = forward_cls(bag.features, p);
  const ScoreMatrix det = forward_det(bag.features, p, 1);
  CHECK((det.values.array() == 1.0).all());
  const Eigen::VectorXd s = image_scores(couple(cls, det));
  CHECK((s - cls.values.col(0)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("couple and image score hand example") {
  ScoreMatrix cls{Eigen::MatrixXd(2, 2), ScoreKind::softmax_cls};
  cls.values << 0.75, 0.5, 0.25, 0.5;
  ScoreMatrix det{Eigen::MatrixXd(2, 2), ScoreKind::softmax_det};
  det.values << 0.1, 0.9, 0.5, 0.5;
  const ScoreMatrix s = couple(cls, det);
  CHECK(s.kind == ScoreKind::coupled);
  CHECK(s.values(0, 0) == doctest::Approx(0.075).epsilon(1e-15));
  CHECK(s.values(0, 1) == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(s.values(1, 0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(s.values(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(image_scores(s)[0] == doctest::Approx(0.525).epsilon(1e-15));

  CHECK_THROWS_AS(couple(det, cls), std::invalid_argument);
  ScoreMatrix wrong{Eigen::MatrixXd::Zero(3, 2), ScoreKind::softmax_det};
  CHECK_THROWS_AS(couple(cls, wrong), std::invalid_argument);
  CHECK_THROWS_AS(image_scores(cls), std::invalid_argument);
}

TEST_CASE("image scores are clamped") {
  ScoreMatrix s{Eigen::MatrixXd(2, 1), ScoreKind::coupled};
  s.values << 0.0, 1.0;
  const Eigen::VectorXd p = image_scores(s);
  CHECK(p[0] == kProbabilityEpsilon);
  CHECK(p[1] == 1.0 - kProbabilityEpsilon);
}

TEST_CASE("branch loss examples") {
  Eigen::VectorXd y(2);
  y << 1, 0;
  Eigen::VectorXd p(2);
  p << 0.5, 0.5;
  CHECK(branch_loss(p, y) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  p << 0.9, 0.2;
  CHECK(branch_loss(p, y) == doctest::Approx(-std::log(0.9) - std::log(0.8)).epsilon(1e-15));
  CHECK(branch_loss(p, y) == doctest::Approx(0.32850).epsilon(1e-5));
  p << 1.0 - 1e-12, 1e-12;
  CHECK(branch_loss(p, y) < 1e-9);
}

TEST_CASE("total loss sums branch losses") {
  const ProposalBag bag = bag_with(5, 3, 4, 4);
  Rng rng(10);
  ModelParams p = testing::random_params(rng, 5, 3, 1, 0);
  const double single = forward(bag, p).loss;
  p.det = {p.det[0], p.det[0], p.det[0]};
  const ForwardTrace t = forward(bag, p);
  CHECK(t.branch_losses.size() == 3);
  CHECK(t.loss == doctest::Approx(3.0 * single).epsilon(1e-14));
  CHECK(total_loss(t) == t.loss);

  ForwardTrace manual;
  manual.branch_losses = {1.0, 0.5, 0.25};
  CHECK(total_loss(manual) == 1.75);
}

TEST_CASE("forward rejects bad input") {
  const ProposalBag bag = bag_with(5, 3, 4, 5);
  const ModelParams p = ModelParams::zeros(6, 3, 2, 0);
  CHECK_THROWS_AS(forward_cls(bag.features, p), std::invalid_argument);
  const ModelParams q = ModelParams::zeros(5, 3, 2, 0);
  CHECK_THROWS_AS(forward_det(bag.features, q, 2), std::out_of_range);
  CHECK_THROWS_AS(forward_det(bag.features, q, -1), std::out_of_range);
  const ModelParams wrong_c = ModelParams::zeros(5, 4, 1, 0);
  CHECK_THROWS_AS(forward(bag, wrong_c), std::invalid_argument);
}

TEST_CASE("stochasticity invariants and determinism") {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const int l = 1 + int(rng() % 8), c = 1 + int(rng() % 4), n = 1 + int(rng() % 6);
    const ProposalBag bag = testing::random_bag(rng, l, c, n);
    const ModelParams p = testing::random_params(rng, l, c, 2, 0, 2.0);
    const ForwardTrace tr = forward(bag, p);
    CHECK((tr.cls.values.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    for (const auto& d : tr.det)
      CHECK((d.values.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    for (const auto& s : tr.image_scores) {
      CHECK(s.minCoeff() >= kProbabilityEpsilon);
      CHECK(s.maxCoeff() <= 1.0 - kProbabilityEpsilon);
    }
    CHECK(forward(bag, p).loss == tr.loss);
  }
}

TEST_CASE("backward matches central differences") {
  Rng rng(13);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int l = 1 + int(rng() % 6), c = 1 + int(rng() % 3), n = 1 + int(rng() % 5);
    const int k = 1 + int(rng() % 3);
    const ProposalBag bag = testing::random_bag(rng, l, c, n);
    const ModelParams p = testing::random_params(rng, l, c, k, 0);
    worst = std::max(worst, testing::mil_gradient_error(bag, p));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("backward hand example (C=3, n=4, l=5)") {
  const ProposalBag bag = bag_with(5, 3, 4, 21);
  Rng rng(22);
  const ModelParams p = testing::random_params(rng, 5, 3, 2, 0);
  CHECK(testing::mil_gradient_error(bag, p) < 1e-5);
}

TEST_CASE("identical branches receive identical gradients") {
  const ProposalBag bag = bag_with(5, 3, 4, 6);
  Rng rng(14);
  ModelParams p = testing::random_params(rng, 5, 3, 1, 0);
  p.det.push_back(p.det[0]);
  const ModelParams g = backward(bag, p);
  CHECK(g.det[0] == g.det[1]);
}

TEST_CASE("gradient vanishes at the loss minimum") {
  // Saturated prediction p = y: both entries are clamped, so no gradient flows.
  ProposalBag bag;
  bag.image_id = "sat";
  bag.labels = Eigen::VectorXd::Zero(2);
  bag.labels[0] = 1.0;
  bag.boxes = {Box{0, 0, 1, 1}};
  bag.features = Eigen::MatrixXd::Zero(1, 1);
  ModelParams p = ModelParams::zeros(1, 2, 1, 0);
  p.cls.bias << 40.0, -40.0;
  const ModelParams g = backward(bag, p);
  CHECK(squared_norm(g) == 0.0);
}

TEST_CASE("parameter helpers") {
  Rng rng(15);
  const ModelParams a = testing::random_params(rng, 3, 2, 2, 1);
  ModelParams b = zeros_like(a);
  CHECK(same_shape(a, b));
  CHECK(squared_norm(b) == 0.0);
  add_scaled(b, a, 2.0);
  CHECK(squared_norm(b) == doctest::Approx(4.0 * squared_norm(a)));
  CHECK_FALSE(same_shape(a, ModelParams::zeros(3, 2, 1, 1)));
  CHECK_THROWS_AS(add_scaled(b, ModelParams::zeros(3, 2, 1, 1), 1.0), std::invalid_argument);
  ModelParams bad = a;
  bad.cls.weight(0, 0) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

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

#include "milfuse/init.hpp"

#include <stdexcept>

#include <Eigen/QR>

#include "milfuse/random.hpp"

namespace milfuse {

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double std_dev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std_dev);
  Eigen::MatrixXd m(rows, cols);
  // Fill column-major so the draw order is fixed.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace

std::string to_string(InitStrategy s) {
  return s == InitStrategy::orthogonal ? "orthogonal" : "gaussian";
}

InitStrategy parse_init_strategy(const std::string& name) {
  if (name == "orthogonal") return InitStrategy::orthogonal;
  if (name == "gaussian") return InitStrategy::gaussian;
  throw std::invalid_argument("unknown init strategy '" + name +
                              "' (expected orthogonal or gaussian)");
}

std::vector<Eigen::MatrixXd> orthogonal_init(int feature_dim, int num_classes, int num_branches,
                                             std::uint64_t seed) {
  if (feature_dim < 1 || num_classes < 1 || num_branches < 1)
    throw std::invalid_argument("orthogonal_init: dimensions must be positive");
  if (num_branches > feature_dim)
    throw std::invalid_argument("orthogonal_init: cannot build " + std::to_string(num_branches) +
                                " orthonormal vectors in a " + std::to_string(feature_dim) +
                                "-dimensional feature space (need K <= l)");

  std::vector<Eigen::MatrixXd> out(num_branches, Eigen::MatrixXd::Zero(feature_dim, num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Rng rng(derive_seed(seed, streams::kDetInit + static_cast<std::uint64_t>(c)));
    const Eigen::MatrixXd draw = normal_matrix(feature_dim, num_branches, 1.0, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(draw);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(feature_dim, num_branches);
    const Eigen::MatrixXd& r = qr.matrixQR();
    for (int k = 0; k < num_branches; ++k) {
      if (r(k, k) < 0.0) q.col(k) = -q.col(k);
      out[k].col(c) = q.col(k);
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> gaussian_init(int feature_dim, int num_classes, int num_branches,
                                           double std_dev, std::uint64_t seed) {
  if (!(std_dev > 0.0)) throw std::invalid_argument("gaussian_init: std must be > 0");
  if (feature_dim < 1 || num_classes < 1 || num_branches < 0)
    throw std::invalid_argument("gaussian_init: dimensions must be positive");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(num_branches);
  for (int k = 0; k < num_branches; ++k) {
    Rng rng(derive_seed(seed, streams::kDetInit + 500 + static_cast<std::uint64_t>(k)));
    out.push_back(normal_matrix(feature_dim, num_classes, std_dev, rng));
  }
  return out;
}

ModelParams initialize(int feature_dim, int num_classes, int num_branches, int num_stages,
                       const InitSpec& spec) {
  if (num_branches < 1) throw std::invalid_argument("initialize: need K >= 1");
  if (num_stages < 0) throw std::invalid_argument("initialize: need R >= 0");
  if (!(spec.gaussian_std > 0.0)) throw std::invalid_argument("initialize: gaussian_std must be > 0");

  ModelParams params = ModelParams::zeros(feature_dim, num_classes, num_branches, num_stages);
  {
    Rng rng(derive_seed(spec.seed, streams::kClsInit));
    params.cls.weight = normal_matrix(feature_dim, num_classes, spec.gaussian_std, rng);
  }
  const auto det = spec.strategy == InitStrategy::orthogonal
                       ? orthogonal_init(feature_dim, num_classes, num_branches, spec.seed)
                       : gaussian_init(feature_dim, num_classes, num_branches, spec.gaussian_std,
                                       spec.seed);
  for (int k = 0; k < num_branches; ++k) params.det[k].weight = det[k];
  for (int j = 0; j < num_stages; ++j) {
    Rng rng(derive_seed(spec.seed, streams::kRefineInit + static_cast<std::uint64_t>(j)));
    params.refine[j].weight = normal_matrix(feature_dim, num_classes + 1, spec.gaussian_std, rng);
  }
  return params;
}

}  // namespace milfuse

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

#ifndef MILFUSE_INIT_HPP_
#define MILFUSE_INIT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "milfuse/milnet.hpp"

namespace milfuse {

enum class InitStrategy { orthogonal, gaussian };

std::string to_string(InitStrategy s);
InitStrategy parse_init_strategy(const std::string& name);

struct InitSpec {
  InitStrategy strategy{InitStrategy::gaussian};
  double gaussian_std{0.01};
  std::uint64_t seed{0};
};

/// K detection-branch weight matrices (each l x C) such that, for every class
/// c, the columns {m^k[:, c]}_k are orthonormal. Each class gets its own
/// Householder QR of an l x K standard normal draw, with R's diagonal made
/// non-negative. Throws std::invalid_argument when K > l.
std::vector<Eigen::MatrixXd> orthogonal_init(int feature_dim, int num_classes, int num_branches,
                                             std::uint64_t seed);

/// K matrices of i.i.d. N(0, std^2) entries; branch k draws from its own
/// derived seed.
std::vector<Eigen::MatrixXd> gaussian_init(int feature_dim, int num_classes, int num_branches,
                                           double std_dev, std::uint64_t seed);

/// Full parameter set. Classification and refinement weights are always
/// Gaussian; `spec.strategy` only affects the detection branches. Biases are zero.
ModelParams initialize(int feature_dim, int num_classes, int num_branches, int num_stages,
                       const InitSpec& spec);

}  // namespace milfuse

#endif  // MILFUSE_INIT_HPP_

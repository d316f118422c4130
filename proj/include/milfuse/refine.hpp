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

#ifndef MILFUSE_REFINE_HPP_
#define MILFUSE_REFINE_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "milfuse/fusion.hpp"
#include "milfuse/geometry.hpp"
#include "milfuse/milnet.hpp"

namespace milfuse {

inline constexpr double kPseudoLabelIou = 0.5;
inline constexpr double kDetectionNmsThreshold = 0.3;

/// Supervising box for an instance classifier stage.
struct SeedBox {
  Box box;
  int class_id{0};
  double score{0.0};
};

/// Per-proposal target class (num_classes means background) and loss weight.
struct PseudoLabels {
  std::vector<int> label;
  std::vector<double> weight;
};

/// Each proposal takes the class of its highest-IoU seed when that IoU is at
/// least 0.5 (weight = seed score), otherwise background with weight 1.
/// IoU ties go to the lower class index.
PseudoLabels assign_pseudo_labels(std::span<const SeedBox> seeds, std::span<const Box> proposals,
                                  int num_classes);

std::vector<SeedBox> seeds_from_fusion(const FusedResult& fused);

/// Top proposal per positive class under a stage's (C+1) x n probabilities.
std::vector<SeedBox> seeds_from_stage(const ScoreMatrix& stage_probs, std::span<const Box> boxes,
                                      const Eigen::VectorXd& labels);

/// (C+1) x n class-axis softmax of one refinement stage.
ScoreMatrix stage_scores(const Linear& stage, const Eigen::MatrixXd& features);

struct RefineLoss {
  double loss{0.0};
  Linear grad;
};

/// Mean over proposals of weight * -log(prob of assigned label), with its
/// analytic gradient.
RefineLoss refine_loss(const Linear& stage, const Eigen::MatrixXd& features,
                       const PseudoLabels& labels);

/// C x n detection scores: mean foreground probability over refinement
/// stages, or the mean coupled score over branches when there are no stages.
Eigen::MatrixXd final_scores(const ModelParams& params, const Eigen::MatrixXd& features);

/// Per-class NMS (0.3) over final_scores() for every class.
std::vector<ScoredBox> inference_scores(const ModelParams& params, const Eigen::MatrixXd& features,
                                        std::span<const Box> boxes);

}  // namespace milfuse

#endif  // MILFUSE_REFINE_HPP_

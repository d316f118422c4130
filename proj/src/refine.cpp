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

#include "milfuse/refine.hpp"

#include <cmath>
#include <stdexcept>

namespace milfuse {

PseudoLabels assign_pseudo_labels(std::span<const SeedBox> seeds, std::span<const Box> proposals,
                                  int num_classes) {
  PseudoLabels out;
  out.label.assign(proposals.size(), num_classes);
  out.weight.assign(proposals.size(), 1.0);
  for (std::size_t n = 0; n < proposals.size(); ++n) {
    double best_iou = -1.0;
    const SeedBox* best = nullptr;
    for (const SeedBox& s : seeds) {
      const double overlap = iou(s.box, proposals[n]);
      if (overlap > best_iou || (overlap == best_iou && best && s.class_id < best->class_id)) {
        best_iou = overlap;
        best = &s;
      }
    }
    if (best && best_iou >= kPseudoLabelIou) {
      out.label[n] = best->class_id;
      out.weight[n] = best->score;
    }
  }
  return out;
}

std::vector<SeedBox> seeds_from_fusion(const FusedResult& fused) {
  std::vector<SeedBox> seeds;
  for (const FusedBox& f : fused.all()) seeds.push_back({f.box, f.class_id, f.score});
  return seeds;
}

std::vector<SeedBox> seeds_from_stage(const ScoreMatrix& stage_probs, std::span<const Box> boxes,
                                      const Eigen::VectorXd& labels) {
  std::vector<SeedBox> seeds;
  for (Eigen::Index c = 0; c < labels.size(); ++c) {
    if (labels[c] != 1.0) continue;
    Eigen::Index best = 0;
    stage_probs.values.row(c).maxCoeff(&best);
    seeds.push_back({boxes[best], static_cast<int>(c), stage_probs.values(c, best)});
  }
  return seeds;
}

ScoreMatrix stage_scores(const Linear& stage, const Eigen::MatrixXd& features) {
  if (features.rows() != stage.inputs())
    throw std::invalid_argument("refinement stage: feature dimension mismatch");
  return {softmax_columns(stage.logits(features)), ScoreKind::refined};
}

RefineLoss refine_loss(const Linear& stage, const Eigen::MatrixXd& features,
                       const PseudoLabels& labels) {
  const Eigen::Index n = features.cols();
  if (static_cast<Eigen::Index>(labels.label.size()) != n ||
      static_cast<Eigen::Index>(labels.weight.size()) != n)
    throw std::invalid_argument("refine_loss: pseudo labels do not cover all proposals");

  const Eigen::MatrixXd probs = stage_scores(stage, features).values;
  Eigen::MatrixXd grad_logits = Eigen::MatrixXd::Zero(probs.rows(), n);
  RefineLoss out;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double w = labels.weight[j];
    if (w == 0.0) continue;
    const int target = labels.label[j];
    out.loss -= w * std::log(probs(target, j));
    grad_logits.col(j) = w * probs.col(j);
    grad_logits(target, j) -= w;
  }
  out.loss /= static_cast<double>(n);
  grad_logits /= static_cast<double>(n);
  out.grad = Linear(stage.inputs(), stage.outputs());
  out.grad.weight.noalias() = features * grad_logits.transpose();
  out.grad.bias = grad_logits.rowwise().sum();
  return out;
}

Eigen::MatrixXd final_scores(const ModelParams& params, const Eigen::MatrixXd& features) {
  const int num_classes = params.num_classes();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(num_classes, features.cols());
  if (params.num_stages() == 0) {
    const ScoreMatrix cls = forward_cls(features, params);
    for (int k = 0; k < params.num_branches(); ++k)
      scores += couple(cls, forward_det(features, params, k)).values;
    return scores / static_cast<double>(params.num_branches());
  }
  for (const Linear& stage : params.refine)
    scores += stage_scores(stage, features).values.topRows(num_classes);
  return scores / static_cast<double>(params.num_stages());
}

std::vector<ScoredBox> inference_scores(const ModelParams& params, const Eigen::MatrixXd& features,
                                        std::span<const Box> boxes) {
  if (features.cols() != static_cast<Eigen::Index>(boxes.size()))
    throw std::invalid_argument("inference_scores: feature/box count mismatch");
  const Eigen::MatrixXd scores = final_scores(params, features);
  std::vector<ScoredBox> out;
  std::vector<ScoredBox> cls_boxes(boxes.size());
  for (int c = 0; c < params.num_classes(); ++c) {
    for (std::size_t n = 0; n < boxes.size(); ++n)
      cls_boxes[n] = {boxes[n], c, scores(c, static_cast<Eigen::Index>(n))};
    const auto kept = nms(cls_boxes, kDetectionNmsThreshold);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

}  // namespace milfuse

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

#include "milfuse/milnet.hpp"

#include <cmath>
#include <stdexcept>

namespace milfuse {

namespace {

void check_features(const Eigen::MatrixXd& features, const ModelParams& params) {
  if (features.rows() != params.feature_dim())
    throw std::invalid_argument("feature dimension " + std::to_string(features.rows()) +
                                " does not match model input dimension " +
                                std::to_string(params.feature_dim()));
  if (features.cols() < 1) throw std::invalid_argument("bag has no proposals");
}

void check_linear(const Linear& layer, Eigen::Index inputs, Eigen::Index outputs,
                  const char* what) {
  if (layer.weight.rows() != inputs || layer.weight.cols() != outputs ||
      layer.bias.size() != outputs)
    throw std::invalid_argument(std::string("inconsistent shape in ") + what + " layer");
  if (!layer.weight.allFinite() || !layer.bias.allFinite())
    throw std::invalid_argument(std::string("non-finite entry in ") + what + " layer");
}

// Backprop through a column softmax: probs and grad_probs are C x n.
Eigen::MatrixXd softmax_columns_backward(const Eigen::MatrixXd& probs,
                                         const Eigen::MatrixXd& grad_probs) {
  const Eigen::RowVectorXd dots = (probs.array() * grad_probs.array()).colwise().sum();
  return (probs.array() * (grad_probs.rowwise() - dots).array()).matrix();
}

Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& probs,
                                      const Eigen::MatrixXd& grad_probs) {
  const Eigen::VectorXd dots = (probs.array() * grad_probs.array()).rowwise().sum();
  return (probs.array() * (grad_probs.colwise() - dots).array()).matrix();
}

void accumulate_linear_grad(Linear& grad, const Eigen::MatrixXd& features,
                            const Eigen::MatrixXd& grad_logits) {
  grad.weight.noalias() += features * grad_logits.transpose();
  grad.bias += grad_logits.rowwise().sum();
}

}  // namespace

Eigen::MatrixXd Linear::logits(const Eigen::MatrixXd& features) const {
  Eigen::MatrixXd out = weight.transpose() * features;
  out.colwise() += bias;
  return out;
}

ModelParams ModelParams::zeros(int feature_dim, int num_classes, int num_branches,
                               int num_stages) {
  ModelParams p;
  p.cls = Linear(feature_dim, num_classes);
  p.det.assign(num_branches, Linear(feature_dim, num_classes));
  p.refine.assign(num_stages, Linear(feature_dim, num_classes + 1));
  return p;
}

void ModelParams::validate() const {
  const Eigen::Index l = cls.weight.rows();
  const Eigen::Index c = cls.weight.cols();
  if (l < 1 || c < 1) throw std::invalid_argument("model needs l >= 1 and C >= 1");
  if (det.empty()) throw std::invalid_argument("model needs at least one detection branch");
  check_linear(cls, l, c, "classification");
  for (const auto& d : det) check_linear(d, l, c, "detection");
  for (const auto& r : refine) check_linear(r, l, c + 1, "refinement");
}

std::vector<Eigen::Map<Eigen::VectorXd>> ModelParams::tensors() {
  std::vector<Eigen::Map<Eigen::VectorXd>> out;
  auto push = [&](Linear& layer) {
    out.emplace_back(layer.weight.data(), layer.weight.size());
    out.emplace_back(layer.bias.data(), layer.bias.size());
  };
  push(cls);
  for (auto& d : det) push(d);
  for (auto& r : refine) push(r);
  return out;
}

std::vector<Eigen::Map<const Eigen::VectorXd>> ModelParams::tensors() const {
  std::vector<Eigen::Map<const Eigen::VectorXd>> out;
  auto push = [&](const Linear& layer) {
    out.emplace_back(layer.weight.data(), layer.weight.size());
    out.emplace_back(layer.bias.data(), layer.bias.size());
  };
  push(cls);
  for (const auto& d : det) push(d);
  for (const auto& r : refine) push(r);
  return out;
}

ModelParams zeros_like(const ModelParams& like) {
  return ModelParams::zeros(like.feature_dim(), like.num_classes(), like.num_branches(),
                            like.num_stages());
}

bool same_shape(const ModelParams& a, const ModelParams& b) {
  return a.feature_dim() == b.feature_dim() && a.num_classes() == b.num_classes() &&
         a.num_branches() == b.num_branches() && a.num_stages() == b.num_stages();
}

void add_scaled(ModelParams& dst, const ModelParams& src, double scale) {
  if (!same_shape(dst, src)) throw std::invalid_argument("add_scaled: shape mismatch");
  auto d = dst.tensors();
  const auto s = src.tensors();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

double squared_norm(const ModelParams& params) {
  double total = 0.0;
  for (const auto& t : params.tensors()) total += t.squaredNorm();
  return total;
}

void ProposalBag::validate() const {
  if (boxes.empty()) throw std::invalid_argument("bag " + image_id + " has no proposals");
  if (features.cols() != static_cast<Eigen::Index>(boxes.size()))
    throw std::invalid_argument("bag " + image_id + ": feature count does not match box count");
  if (features.rows() < 1) throw std::invalid_argument("bag " + image_id + ": empty features");
  if (labels.size() < 1) throw std::invalid_argument("bag " + image_id + ": no labels");
  for (Eigen::Index c = 0; c < labels.size(); ++c)
    if (labels[c] != 0.0 && labels[c] != 1.0)
      throw std::invalid_argument("bag " + image_id + ": labels must be 0 or 1");
  for (const Box& b : boxes)
    if (!b.valid()) throw std::invalid_argument("bag " + image_id + ": invalid box");
}

ScoreMatrix forward_cls(const Eigen::MatrixXd& features, const ModelParams& params) {
  check_features(features, params);
  return {softmax_columns(params.cls.logits(features)), ScoreKind::softmax_cls};
}

ScoreMatrix forward_det(const Eigen::MatrixXd& features, const ModelParams& params, int branch) {
  if (branch < 0 || branch >= params.num_branches())
    throw std::out_of_range("detection branch " + std::to_string(branch) + " out of range [0, " +
                            std::to_string(params.num_branches()) + ")");
  check_features(features, params);
  return {softmax_rows(params.det[branch].logits(features)), ScoreKind::softmax_det};
}

ScoreMatrix couple(const ScoreMatrix& cls, const ScoreMatrix& det) {
  if (cls.kind != ScoreKind::softmax_cls || det.kind != ScoreKind::softmax_det)
    throw std::invalid_argument("couple expects (softmax_cls, softmax_det) inputs");
  if (cls.values.rows() != det.values.rows() || cls.values.cols() != det.values.cols())
    throw std::invalid_argument("couple: shape mismatch");
  return {cls.values.cwiseProduct(det.values), ScoreKind::coupled};
}

Eigen::VectorXd image_scores(const ScoreMatrix& coupled) {
  if (coupled.kind != ScoreKind::coupled)
    throw std::invalid_argument("image_scores expects a coupled score matrix");
  return coupled.values.rowwise().sum().cwiseMax(kProbabilityEpsilon).cwiseMin(
      1.0 - kProbabilityEpsilon);
}

double branch_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& y) {
  if (p.size() != y.size()) throw std::invalid_argument("branch_loss: size mismatch");
  double loss = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c)
    loss -= y[c] * std::log(p[c]) + (1.0 - y[c]) * std::log(1.0 - p[c]);
  return loss;
}

ForwardTrace forward(const ProposalBag& bag, const ModelParams& params) {
  if (bag.num_classes() != params.num_classes())
    throw std::invalid_argument("bag class count does not match model");
  ForwardTrace trace;
  trace.cls = forward_cls(bag.features, params);
  const int k_count = params.num_branches();
  trace.det.reserve(k_count);
  trace.coupled.reserve(k_count);
  for (int k = 0; k < k_count; ++k) {
    trace.det.push_back(forward_det(bag.features, params, k));
    trace.coupled.push_back(couple(trace.cls, trace.det.back()));
    trace.image_scores.push_back(image_scores(trace.coupled.back()));
    trace.branch_losses.push_back(branch_loss(trace.image_scores.back(), bag.labels));
  }
  trace.loss = total_loss(trace);
  return trace;
}

double total_loss(const ForwardTrace& trace) {
  double sum = 0.0;
  for (double l : trace.branch_losses) sum += l;
  return sum;
}

ModelParams backward(const ProposalBag& bag, const ModelParams& params) {
  return backward(bag, params, forward(bag, params));
}

ModelParams backward(const ProposalBag& bag, const ModelParams& params,
                     const ForwardTrace& trace) {
  ModelParams grad = zeros_like(params);
  const Eigen::VectorXd& y = bag.labels;
  const Eigen::MatrixXd& cls = trace.cls.values;
  Eigen::MatrixXd grad_cls_probs = Eigen::MatrixXd::Zero(cls.rows(), cls.cols());

  for (int k = 0; k < params.num_branches(); ++k) {
    const Eigen::MatrixXd& det = trace.det[k].values;
    const Eigen::VectorXd raw = trace.coupled[k].values.rowwise().sum();

    // dL/dp, zero where the clamp is active.
    Eigen::VectorXd grad_p(y.size());
    for (Eigen::Index c = 0; c < y.size(); ++c) {
      const double p = raw[c];
      if (p <= kProbabilityEpsilon || p >= 1.0 - kProbabilityEpsilon) {
        grad_p[c] = 0.0;
      } else {
        grad_p[c] = -y[c] / p + (1.0 - y[c]) / (1.0 - p);
      }
    }

    // dL/dsigma^k broadcasts grad_p along proposals.
    const Eigen::MatrixXd grad_det_probs = cls.array().colwise() * grad_p.array();
    grad_cls_probs.array() += det.array().colwise() * grad_p.array();

    accumulate_linear_grad(grad.det[k], bag.features, softmax_rows_backward(det, grad_det_probs));
  }

  accumulate_linear_grad(grad.cls, bag.features, softmax_columns_backward(cls, grad_cls_probs));
  return grad;
}

}  // namespace milfuse

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

// Multi-branch two-stream MIL scoring head over precomputed proposal
// features. One classification stream (softmax over classes) is shared by K
// detection streams (softmax over proposals); each pair is coupled by an
// element-wise product and summed over proposals into image-level scores
// trained with binary cross entropy.

#ifndef MILFUSE_MILNET_HPP_
#define MILFUSE_MILNET_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "milfuse/geometry.hpp"

namespace milfuse {

/// Clamp applied to image scores before the log in the BCE loss.
inline constexpr double kProbabilityEpsilon = 1e-10;

/// Column-wise softmax (each column sums to one), max-subtracted.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
softmax_columns(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
  out.array().rowwise() /= out.colwise().sum().array();
  return out;
}

/// Row-wise softmax (each row sums to one), max-subtracted.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

/// Fully connected layer mapping l-dimensional features to `outputs` logits:
/// logits = weightᵀ · features + bias.
struct Linear {
  Eigen::MatrixXd weight;  // l x outputs
  Eigen::VectorXd bias;    // outputs

  Linear() = default;
  Linear(Eigen::Index inputs, Eigen::Index outputs)
      : weight(Eigen::MatrixXd::Zero(inputs, outputs)), bias(Eigen::VectorXd::Zero(outputs)) {}

  Eigen::Index inputs() const { return weight.rows(); }
  Eigen::Index outputs() const { return weight.cols(); }

  /// features is l x n; result is outputs x n.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& features) const;

  friend bool operator==(const Linear& a, const Linear& b) {
    return a.weight == b.weight && a.bias == b.bias;
  }
};

/// Trainable parameters: shared classification layer, K detection layers and
/// R refinement stages ((C+1)-way, last output is background).
struct ModelParams {
  Linear cls;
  std::vector<Linear> det;
  std::vector<Linear> refine;

  static ModelParams zeros(int feature_dim, int num_classes, int num_branches, int num_stages);

  int feature_dim() const { return static_cast<int>(cls.inputs()); }
  int num_classes() const { return static_cast<int>(cls.outputs()); }
  int num_branches() const { return static_cast<int>(det.size()); }
  int num_stages() const { return static_cast<int>(refine.size()); }

  /// Throws std::invalid_argument on inconsistent shapes or non-finite entries.
  void validate() const;

  /// Flat mutable views over every weight matrix and bias vector, in a fixed
  /// order (cls, det..., refine...; weight before bias).
  std::vector<Eigen::Map<Eigen::VectorXd>> tensors();
  std::vector<Eigen::Map<const Eigen::VectorXd>> tensors() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Zero-valued parameters with the same shapes as `like`.
ModelParams zeros_like(const ModelParams& like);
/// dst += scale * src, shapes must match.
void add_scaled(ModelParams& dst, const ModelParams& src, double scale);
double squared_norm(const ModelParams& params);
bool same_shape(const ModelParams& a, const ModelParams& b);

/// One image: image-level labels plus its candidate proposals.
struct ProposalBag {
  std::string image_id;
  Eigen::VectorXd labels;     // C entries, 0 or 1
  std::vector<Box> boxes;     // n proposals
  Eigen::MatrixXd features;   // l x n, column j describes boxes[j]

  int num_classes() const { return static_cast<int>(labels.size()); }
  int num_proposals() const { return static_cast<int>(boxes.size()); }
  int feature_dim() const { return static_cast<int>(features.rows()); }

  void validate() const;
};

enum class ScoreKind { logits_cls, logits_det, softmax_cls, softmax_det, coupled, refined };

/// C x n matrix of per-class, per-proposal values tagged by what it holds.
struct ScoreMatrix {
  Eigen::MatrixXd values;
  ScoreKind kind{ScoreKind::coupled};

  Eigen::Index num_classes() const { return values.rows(); }
  Eigen::Index num_proposals() const { return values.cols(); }
};

ScoreMatrix forward_cls(const Eigen::MatrixXd& features, const ModelParams& params);
ScoreMatrix forward_det(const Eigen::MatrixXd& features, const ModelParams& params, int branch);
ScoreMatrix couple(const ScoreMatrix& cls, const ScoreMatrix& det);

/// Sum over proposals, clamped to [eps, 1 - eps].
Eigen::VectorXd image_scores(const ScoreMatrix& coupled);

/// Multi-label binary cross entropy summed over classes.
double branch_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& y);

struct ForwardTrace {
  ScoreMatrix cls;
  std::vector<ScoreMatrix> det;
  std::vector<ScoreMatrix> coupled;
  std::vector<Eigen::VectorXd> image_scores;
  std::vector<double> branch_losses;
  double loss{0.0};
};

ForwardTrace forward(const ProposalBag& bag, const ModelParams& params);
double total_loss(const ForwardTrace& trace);

/// Gradient of the summed MIL loss with respect to cls and det parameters.
/// Refinement entries of the result are zero.
ModelParams backward(const ProposalBag& bag, const ModelParams& params);
ModelParams backward(const ProposalBag& bag, const ModelParams& params, const ForwardTrace& trace);

}  // namespace milfuse

#endif  // MILFUSE_MILNET_HPP_

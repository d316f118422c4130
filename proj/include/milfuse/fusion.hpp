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

// Surrounded candidates suppression: per positive class, take each branch's
// top-scoring proposal, drop every candidate that is properly contained in
// another candidate, then run NMS at 0.1 over what is left.

#ifndef MILFUSE_FUSION_HPP_
#define MILFUSE_FUSION_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "milfuse/geometry.hpp"
#include "milfuse/milnet.hpp"

namespace milfuse {

inline constexpr double kFusionNmsThreshold = 0.1;

struct FusedBox {
  Box box;
  int class_id{0};
  double score{0.0};
  int branch{0};    // branch that contributed the max score
  int proposal{0};  // index into the bag's proposals

  ScoredBox scored() const { return {box, class_id, score}; }
};

struct FusedResult {
  /// Survivors per class; empty for classes with y_c = 0.
  std::vector<std::vector<FusedBox>> per_class;

  std::vector<FusedBox> all() const;
};

struct TopBox {
  int proposal{0};
  ScoredBox scored;
};

/// Proposal maximizing coupled[c, n]; ties go to the lowest index.
TopBox top_box(const ScoreMatrix& coupled, std::span<const Box> boxes, int class_id);

FusedResult scs(std::span<const ScoreMatrix> branch_scores, std::span<const Box> boxes,
                const Eigen::VectorXd& labels);

/// Highest-scoring survivor of class c. Throws std::logic_error if none.
FusedBox fused_top_box(const FusedResult& fused, int class_id);

}  // namespace milfuse

#endif  // MILFUSE_FUSION_HPP_

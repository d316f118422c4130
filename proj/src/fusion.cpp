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

#include "milfuse/fusion.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace milfuse {

std::vector<FusedBox> FusedResult::all() const {
  std::vector<FusedBox> out;
  for (const auto& cls : per_class) out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

TopBox top_box(const ScoreMatrix& coupled, std::span<const Box> boxes, int class_id) {
  if (boxes.empty()) throw std::invalid_argument("top_box: no proposals");
  if (coupled.values.cols() != static_cast<Eigen::Index>(boxes.size()))
    throw std::invalid_argument("top_box: score/box count mismatch");
  if (class_id < 0 || class_id >= coupled.values.rows())
    throw std::out_of_range("top_box: class out of range");
  Eigen::Index best = 0;
  const auto row = coupled.values.row(class_id);
  for (Eigen::Index n = 1; n < row.size(); ++n)
    if (row[n] > row[best]) best = n;
  return {static_cast<int>(best), ScoredBox{boxes[best], class_id, row[best]}};
}

FusedResult scs(std::span<const ScoreMatrix> branch_scores, std::span<const Box> boxes,
                const Eigen::VectorXd& labels) {
  if (branch_scores.empty()) throw std::invalid_argument("scs: need at least one branch");
  const int num_classes = static_cast<int>(labels.size());
  FusedResult result;
  result.per_class.resize(num_classes);

  for (int c = 0; c < num_classes; ++c) {
    if (labels[c] != 1.0) continue;

    // B_top as a set keyed by box coordinates; duplicates keep the max score.
    std::vector<FusedBox> top;
    for (std::size_t k = 0; k < branch_scores.size(); ++k) {
      const TopBox t = top_box(branch_scores[k], boxes, c);
      auto same = std::find_if(top.begin(), top.end(),
                               [&](const FusedBox& f) { return f.box == t.scored.box; });
      if (same == top.end()) {
        top.push_back({t.scored.box, c, t.scored.score, static_cast<int>(k), t.proposal});
      } else if (t.scored.score > same->score) {
        same->score = t.scored.score;
        same->branch = static_cast<int>(k);
        same->proposal = t.proposal;
      }
    }

    // Simultaneous removal against the original candidate set.
    std::vector<FusedBox> kept;
    for (const FusedBox& cand : top) {
      const bool surrounded = std::any_of(top.begin(), top.end(), [&](const FusedBox& other) {
        return surrounds(other.box, cand.box);
      });
      if (!surrounded) kept.push_back(cand);
    }

    // Canonical order so equal scores do not depend on branch order.
    std::sort(kept.begin(), kept.end(), [](const FusedBox& a, const FusedBox& b) {
      return std::tie(a.box.x1, a.box.y1, a.box.x2, a.box.y2) <
             std::tie(b.box.x1, b.box.y1, b.box.x2, b.box.y2);
    });
    std::vector<ScoredBox> scored;
    scored.reserve(kept.size());
    for (const FusedBox& f : kept) scored.push_back(f.scored());
    for (std::size_t idx : nms_indices(scored, kFusionNmsThreshold))
      result.per_class[c].push_back(kept[idx]);
  }
  return result;
}

FusedBox fused_top_box(const FusedResult& fused, int class_id) {
  if (class_id < 0 || class_id >= static_cast<int>(fused.per_class.size()) ||
      fused.per_class[class_id].empty())
    throw std::logic_error("fused_top_box: class " + std::to_string(class_id) +
                           " has no surviving boxes");
  const auto& cls = fused.per_class[class_id];
  // Survivors are already in descending score order.
  return *std::max_element(cls.begin(), cls.end(), [](const FusedBox& a, const FusedBox& b) {
    return a.score < b.score;
  });
}

}  // namespace milfuse

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

#include "milfuse/geometry.hpp"

#include <numeric>

namespace milfuse {

std::vector<std::size_t> nms_indices(std::span<const ScoredBox> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });

  std::vector<std::size_t> keep;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t cur = order[i];
    if (suppressed[cur]) continue;
    keep.push_back(cur);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t other = order[j];
      if (!suppressed[other] && iou(boxes[cur].box, boxes[other].box) > iou_threshold)
        suppressed[other] = true;
    }
  }
  return keep;
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold) {
  std::vector<ScoredBox> kept;
  for (std::size_t idx : nms_indices(boxes, iou_threshold)) kept.push_back(boxes[idx]);
  return kept;
}

}  // namespace milfuse

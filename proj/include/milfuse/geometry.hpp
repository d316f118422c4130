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

#ifndef MILFUSE_GEOMETRY_HPP_
#define MILFUSE_GEOMETRY_HPP_

#include <algorithm>
#include <span>
#include <vector>

namespace milfuse {

/// Axis-aligned rectangle in continuous coordinates (no +1 pixel convention).
template <typename Scalar>
struct BasicBox {
  Scalar x1{0}, y1{0}, x2{0}, y2{0};

  Scalar width() const { return x2 - x1; }
  Scalar height() const { return y2 - y1; }
  Scalar area() const { return width() * height(); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  friend bool operator==(const BasicBox&, const BasicBox&) = default;
};

using Box = BasicBox<double>;

template <typename Scalar>
Scalar intersection_area(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  const Scalar w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const Scalar h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= Scalar(0) || h <= Scalar(0)) return Scalar(0);
  return w * h;
}

/// Intersection over union. Returns 0 when the union is empty.
template <typename Scalar>
Scalar iou(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= Scalar(0)) return Scalar(0);
  return inter / uni;
}

/// True iff `outer` contains `inner` with at least one strict inequality.
/// An identical copy is never surrounded.
template <typename Scalar>
bool surrounds(const BasicBox<Scalar>& outer, const BasicBox<Scalar>& inner) {
  const bool contains = outer.x1 <= inner.x1 && outer.y1 <= inner.y1 &&
                        outer.x2 >= inner.x2 && outer.y2 >= inner.y2;
  return contains && !(outer == inner);
}

struct ScoredBox {
  Box box;
  int class_id{0};
  double score{0.0};

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

/// Greedy NMS. Output is in descending score order; equal scores keep
/// their input order. A box is dropped when its IoU with an already kept
/// box is strictly greater than `iou_threshold`.
std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold);

/// Index form of nms(): positions into `boxes` of the kept entries.
std::vector<std::size_t> nms_indices(std::span<const ScoredBox> boxes, double iou_threshold);

}  // namespace milfuse

#endif  // MILFUSE_GEOMETRY_HPP_

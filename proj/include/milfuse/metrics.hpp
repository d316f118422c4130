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

#ifndef MILFUSE_METRICS_HPP_
#define MILFUSE_METRICS_HPP_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "milfuse/geometry.hpp"

namespace milfuse {

inline constexpr double kInconsistentIou = 0.5;
inline constexpr double kPositiveIou = 0.5;

struct GtObject {
  int class_id{0};
  Box box;

  friend bool operator==(const GtObject&, const GtObject&) = default;
};

/// Ground-truth objects per image, aligned with the bag order of a split.
struct GroundTruth {
  std::vector<std::vector<GtObject>> images;

  bool has_class(std::size_t image, int class_id) const;
  void validate(int num_classes) const;
};

/// Per-class values over classes that could be evaluated; absent classes
/// are left out of both `per_class` and `mean`.
struct ClassMetricReport {
  std::vector<std::pair<int, double>> per_class;
  double mean{0.0};

  std::optional<double> value(int class_id) const;
  std::string to_csv() const;
  std::string to_json() const;
};

ClassMetricReport make_report(std::vector<std::pair<int, double>> per_class);

/// Fraction of positive images whose two top boxes overlap with IoU < 0.5.
/// `a` and `b` are aligned over the positive images of one class. Throws
/// std::invalid_argument when empty or misaligned.
double idr_class(std::span<const Box> a, std::span<const Box> b);

/// Mean over classes. Throws std::invalid_argument on empty input.
double midr(std::span<const double> per_class_idr);

/// [image][class] -> top box when the class is positive for that image.
using TopBoxTable = std::vector<std::vector<std::optional<Box>>>;

/// IDR per class over images where both tables hold a box.
ClassMetricReport idr_report(const TopBoxTable& a, const TopBoxTable& b, int num_classes);

/// Per class, fraction of images containing the class whose top box has
/// IoU >= 0.5 with at least one ground-truth box of that class.
ClassMetricReport corloc(const TopBoxTable& top, const GroundTruth& gt, int num_classes);

enum class ApMode { eleven_point, all_point };

struct Detection {
  std::size_t image{0};
  ScoredBox det;
};

/// PASCAL-style AP at IoU 0.5 for one class. nullopt when the class has no
/// ground truth.
std::optional<double> average_precision(std::span<const Detection> dets, const GroundTruth& gt,
                                        int class_id, ApMode mode = ApMode::eleven_point);

/// AP for every class that has ground truth, with their mean.
ClassMetricReport mean_average_precision(std::span<const Detection> dets, const GroundTruth& gt,
                                         int num_classes, ApMode mode = ApMode::eleven_point);

/// Spearman rank correlation with average ranks for ties. Returns 0 if
/// either input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace milfuse

#endif  // MILFUSE_METRICS_HPP_

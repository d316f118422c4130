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

#include "milfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace milfuse {

bool GroundTruth::has_class(std::size_t image, int class_id) const {
  const auto& objs = images.at(image);
  return std::any_of(objs.begin(), objs.end(),
                     [&](const GtObject& o) { return o.class_id == class_id; });
}

void GroundTruth::validate(int num_classes) const {
  for (const auto& objs : images)
    for (const auto& o : objs) {
      if (o.class_id < 0 || o.class_id >= num_classes)
        throw std::invalid_argument("ground truth class id out of range");
      if (!o.box.valid()) throw std::invalid_argument("ground truth box is invalid");
    }
}

std::optional<double> ClassMetricReport::value(int class_id) const {
  for (const auto& [c, v] : per_class)
    if (c == class_id) return v;
  return std::nullopt;
}

std::string ClassMetricReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "class_id,value\n";
  for (const auto& [c, v] : per_class) os << c << ',' << v << '\n';
  os << "mean," << mean << '\n';
  return os.str();
}

std::string ClassMetricReport::to_json() const {
  nlohmann::json j;
  j["per_class"] = nlohmann::json::array();
  for (const auto& [c, v] : per_class) j["per_class"].push_back({{"class_id", c}, {"value", v}});
  j["mean"] = mean;
  return j.dump();
}

ClassMetricReport make_report(std::vector<std::pair<int, double>> per_class) {
  ClassMetricReport r;
  r.per_class = std::move(per_class);
  if (!r.per_class.empty()) {
    double sum = 0.0;
    for (const auto& pc : r.per_class) sum += pc.second;
    r.mean = sum / static_cast<double>(r.per_class.size());
  }
  return r;
}

double idr_class(std::span<const Box> a, std::span<const Box> b) {
  if (a.size() != b.size()) throw std::invalid_argument("idr_class: detectors are misaligned");
  if (a.empty()) throw std::invalid_argument("idr_class: no positive images for this class");
  std::size_t inconsistent = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (iou(a[i], b[i]) < kInconsistentIou) ++inconsistent;
  return static_cast<double>(inconsistent) / static_cast<double>(a.size());
}

double midr(std::span<const double> per_class_idr) {
  if (per_class_idr.empty()) throw std::invalid_argument("midr: no classes");
  return std::accumulate(per_class_idr.begin(), per_class_idr.end(), 0.0) /
         static_cast<double>(per_class_idr.size());
}

ClassMetricReport idr_report(const TopBoxTable& a, const TopBoxTable& b, int num_classes) {
  if (a.size() != b.size()) throw std::invalid_argument("idr_report: image count mismatch");
  std::vector<std::pair<int, double>> per_class;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<Box> ba, bb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& x = a[i].at(c);
      const auto& y = b[i].at(c);
      if (x && y) {
        ba.push_back(*x);
        bb.push_back(*y);
      }
    }
    if (!ba.empty()) per_class.emplace_back(c, idr_class(ba, bb));
  }
  return make_report(std::move(per_class));
}

ClassMetricReport corloc(const TopBoxTable& top, const GroundTruth& gt, int num_classes) {
  if (top.size() != gt.images.size()) throw std::invalid_argument("corloc: image count mismatch");
  std::vector<std::pair<int, double>> per_class;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t positives = 0, hits = 0;
    for (std::size_t i = 0; i < top.size(); ++i) {
      if (!gt.has_class(i, c)) continue;
      ++positives;
      const auto& box = top[i].at(c);
      if (!box) continue;
      for (const auto& o : gt.images[i])
        if (o.class_id == c && iou(*box, o.box) >= kPositiveIou) {
          ++hits;
          break;
        }
    }
    if (positives > 0)
      per_class.emplace_back(c, static_cast<double>(hits) / static_cast<double>(positives));
  }
  return make_report(std::move(per_class));
}

std::optional<double> average_precision(std::span<const Detection> dets, const GroundTruth& gt,
                                        int class_id, ApMode mode) {
  std::size_t npos = 0;
  std::vector<std::vector<bool>> matched(gt.images.size());
  for (std::size_t i = 0; i < gt.images.size(); ++i) {
    matched[i].assign(gt.images[i].size(), false);
    for (const auto& o : gt.images[i])
      if (o.class_id == class_id) ++npos;
  }
  if (npos == 0) return std::nullopt;

  std::vector<const Detection*> order;
  for (const Detection& d : dets)
    if (d.det.class_id == class_id) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const Detection* a, const Detection* b) {
    return a->det.score > b->det.score;
  });

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (const Detection* d : order) {
    if (d->image >= gt.images.size()) throw std::out_of_range("detection image out of range");
    const auto& objs = gt.images[d->image];
    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t g = 0; g < objs.size(); ++g) {
      if (objs[g].class_id != class_id) continue;
      const double overlap = iou(d->det.box, objs[g].box);
      if (overlap > best) {
        best = overlap;
        best_idx = g;
      }
    }
    if (best >= kPositiveIou && !matched[d->image][best_idx]) {
      matched[d->image][best_idx] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  if (mode == ApMode::eleven_point) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double thr = t / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i)
        if (recall[i] >= thr) p = std::max(p, precision[i]);
      ap += p;
    }
    return ap / 11.0;
  }

  // All-point: area under the monotone precision envelope.
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

ClassMetricReport mean_average_precision(std::span<const Detection> dets, const GroundTruth& gt,
                                         int num_classes, ApMode mode) {
  std::vector<std::pair<int, double>> per_class;
  for (int c = 0; c < num_classes; ++c)
    if (auto ap = average_precision(dets, gt, c, mode)) per_class.emplace_back(c, *ap);
  return make_report(std::move(per_class));
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman: need two aligned samples of size >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace milfuse

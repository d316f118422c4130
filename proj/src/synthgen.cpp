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

#include "milfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "milfuse/random.hpp"

namespace milfuse {

namespace {

constexpr double kMinWholeIou = 0.7;
constexpr double kMaxBackgroundIou = 0.3;
constexpr double kMinPartArea = 0.10;
constexpr double kMaxPartArea = 0.40;
constexpr int kMaxTries = 10000;

struct Image {
  ProposalBag bag;
  std::vector<GtObject> gt;
  std::vector<ProposalOrigin> origins;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Box jitter_whole(const Box& gt, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double sx = 0.06 * gt.width();
  const double sy = 0.06 * gt.height();
  for (int t = 0; t < kMaxTries; ++t) {
    Box b{gt.x1 + sx * n(rng), gt.y1 + sy * n(rng), gt.x2 + sx * n(rng), gt.y2 + sy * n(rng)};
    if (b.valid() && b.area() > 0.0 && iou(b, gt) >= kMinWholeIou) return b;
  }
  return gt;
}

// Strictly inside `region`, area a fraction of `gt_area`.
Box sample_part(const Box& region, double gt_area, Rng& rng) {
  for (int t = 0; t < kMaxTries; ++t) {
    const double area = uniform(rng, kMinPartArea, kMaxPartArea) * gt_area;
    const double aspect = std::exp(uniform(rng, std::log(0.5), std::log(2.0)));
    const double w = std::sqrt(area * aspect);
    const double h = area / w;
    if (w >= region.width() || h >= region.height()) continue;
    const double x1 = uniform(rng, region.x1, region.x2 - w);
    const double y1 = uniform(rng, region.y1, region.y2 - h);
    Box b{x1, y1, x1 + w, y1 + h};
    if (b.x1 > region.x1 && b.y1 > region.y1 && b.x2 < region.x2 && b.y2 < region.y2) return b;
  }
  throw std::runtime_error("synthgen: could not place a part proposal");
}

Box sample_background(const SynthConfig& cfg, const std::vector<GtObject>& gt, Rng& rng) {
  Box b;
  for (int t = 0; t < kMaxTries; ++t) {
    const double w = uniform(rng, 0.1, 0.5) * cfg.canvas_width;
    const double h = uniform(rng, 0.1, 0.5) * cfg.canvas_height;
    const double x1 = uniform(rng, 0.0, cfg.canvas_width - w);
    const double y1 = uniform(rng, 0.0, cfg.canvas_height - h);
    b = {x1, y1, x1 + w, y1 + h};
    const bool clear = std::all_of(gt.begin(), gt.end(), [&](const GtObject& o) {
      return iou(b, o.box) < kMaxBackgroundIou;
    });
    if (clear) return b;
  }
  return b;
}

Image make_image(const SynthConfig& cfg, int index) {
  Rng rng(derive_seed(cfg.seed, streams::kImage + static_cast<std::uint64_t>(index)));
  const int c_count = cfg.num_classes;
  const int l = cfg.feature_dim;
  const int type_base = c_count;
  const int context_base = c_count + c_count * (1 + cfg.part_types);

  Image img;
  img.bag.image_id = "img_" + std::to_string(index);
  img.bag.labels = Eigen::VectorXd::Zero(c_count);

  const int objects = std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
  std::vector<Box> boxes;
  std::vector<Eigen::VectorXd> signals;

  for (int o = 0; o < objects; ++o) {
    const int cls = std::uniform_int_distribution<int>(0, c_count - 1)(rng);
    const double w = uniform(rng, cfg.min_object_size, cfg.max_object_size);
    const double h = uniform(rng, cfg.min_object_size, cfg.max_object_size);
    const double x1 = uniform(rng, 0.0, cfg.canvas_width - w);
    const double y1 = uniform(rng, 0.0, cfg.canvas_height - h);
    const Box gt{x1, y1, x1 + w, y1 + h};
    img.gt.push_back({cls, gt});
    img.bag.labels[cls] = 1.0;

    const int type_offset = type_base + cls * (1 + cfg.part_types);
    const Box whole = jitter_whole(gt, rng);
    Eigen::VectorXd sig = Eigen::VectorXd::Zero(l);
    sig[cls] = cfg.whole_signal;
    sig[type_offset] = cfg.whole_signal * cfg.type_signature;
    boxes.push_back(whole);
    signals.push_back(sig);
    img.origins.push_back({ProposalRole::whole, o, -1});

    const Box region{std::max(gt.x1, whole.x1), std::max(gt.y1, whole.y1),
                     std::min(gt.x2, whole.x2), std::min(gt.y2, whole.y2)};
    const double part_strength = cfg.part_signal_for(cls);
    for (int p = 0; p < cfg.parts_per_object; ++p) {
      const int type = p % cfg.part_types;
      Eigen::VectorXd psig = Eigen::VectorXd::Zero(l);
      psig[cls] = part_strength;
      psig[type_offset + 1 + type] = part_strength * cfg.type_signature;
      boxes.push_back(sample_part(region, gt.area(), rng));
      signals.push_back(psig);
      img.origins.push_back({ProposalRole::part, o, type});
    }
  }

  for (int b = 0; b < cfg.background_proposals; ++b) {
    boxes.push_back(sample_background(cfg, img.gt, rng));
    signals.push_back(Eigen::VectorXd::Zero(l));
    img.origins.push_back({ProposalRole::background, -1, -1});
  }

  Eigen::VectorXd context = Eigen::VectorXd::Zero(l);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int d = context_base; d < l; ++d) context[d] = cfg.context_strength * unit(rng);

  // Shuffle so proposal index carries no information about its role.
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const int n = static_cast<int>(boxes.size());
  img.bag.features.resize(l, n);
  img.bag.boxes.resize(n);
  std::vector<ProposalOrigin> origins(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    img.bag.boxes[j] = boxes[src];
    origins[j] = img.origins[src];
    Eigen::VectorXd f = context + signals[src];
    if (cfg.noise_std > 0.0)
      for (int d = 0; d < l; ++d) f[d] += cfg.noise_std * noise(rng);
    img.bag.features.col(j) = f;
  }
  img.origins = std::move(origins);
  return img;
}

}  // namespace

double SynthConfig::part_signal_for(int class_id) const {
  if (num_classes <= 1) return part_signal;
  return part_signal - part_signal_spread * static_cast<double>(class_id) /
                           static_cast<double>(num_classes - 1);
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("synth config: " + msg);
  };
  require(num_classes >= 1, "num_classes must be >= 1");
  require(images >= 2, "images must be >= 2");
  require(min_objects >= 1 && max_objects >= min_objects, "need 1 <= min_objects <= max_objects");
  require(parts_per_object >= 0, "parts_per_object must be >= 0");
  require(part_types >= 1, "part_types must be >= 1");
  require(background_proposals >= 0, "background_proposals must be >= 0");
  require(noise_std >= 0.0, "noise_std must be >= 0");
  require(whole_signal >= 0.0 && part_signal >= 0.0, "signals must be >= 0");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0, 1)");
  require(feature_dim >= num_classes * (2 + part_types),
          "feature_dim must be at least num_classes * (2 + part_types) = " +
              std::to_string(num_classes * (2 + part_types)));
  require(min_object_size > 0.0 && max_object_size >= min_object_size,
          "need 0 < min_object_size <= max_object_size");
  require(max_object_size <= canvas_width && max_object_size <= canvas_height,
          "objects larger than the canvas are infeasible");
}

int Dataset::num_classes() const {
  if (!train.bags.empty()) return train.bags.front().num_classes();
  if (!test.bags.empty()) return test.bags.front().num_classes();
  return 0;
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  std::vector<Image> images;
  images.reserve(config.images);
  for (int i = 0; i < config.images; ++i) images.push_back(make_image(config, i));

  std::vector<int> order(config.images);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.seed, streams::kSplit));
  std::shuffle(order.begin(), order.end(), split_rng);
  const int train_count = std::clamp(
      static_cast<int>(std::lround(config.train_fraction * config.images)), 1, config.images - 1);
  std::sort(order.begin(), order.begin() + train_count);
  std::sort(order.begin() + train_count, order.end());

  Dataset ds;
  for (int pos = 0; pos < config.images; ++pos) {
    Split& split = pos < train_count ? ds.train : ds.test;
    Image& img = images[order[pos]];
    split.bags.push_back(std::move(img.bag));
    split.gt.images.push_back(std::move(img.gt));
    split.origins.push_back(std::move(img.origins));
  }
  return ds;
}

}  // namespace milfuse

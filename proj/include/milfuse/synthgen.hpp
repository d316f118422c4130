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

// Seeded synthetic bags with planted whole/part structure.
//
// Every object contributes one "whole" proposal (IoU >= 0.7 with its ground
// truth) and several "part" proposals strictly inside both the ground truth
// and the whole box. Feature layout over l dimensions:
//
//   [0, C)                      class signature, one basis vector per class
//   [C, C + C*(1+T))            per-class type signatures: whole, part 0..T-1
//   [C + C*(1+T), l)            image context
//
// A whole proposal of class c is  ctx + s_w (e_c + tau * e_whole(c)) + noise,
// a part of type j is             ctx + s_p(c) (e_c + tau * e_part(c, j)) + noise,
// and background proposals carry  ctx + noise  only. Part types are
// class-specific and only ever co-occur with their whole, so each of them is
// an equally valid explanation of the image label for a MIL learner.

#ifndef MILFUSE_SYNTHGEN_HPP_
#define MILFUSE_SYNTHGEN_HPP_

#include <cstdint>
#include <vector>

#include "milfuse/metrics.hpp"
#include "milfuse/milnet.hpp"

namespace milfuse {

struct SynthConfig {
  int num_classes{6};
  int feature_dim{32};
  int images{1000};
  int min_objects{1};
  int max_objects{3};
  int parts_per_object{2};
  int part_types{2};
  int background_proposals{8};
  double whole_signal{3.0};
  /// Part strength of class 0; class c uses part_signal - spread * c / (C - 1).
  double part_signal{3.1};
  double part_signal_spread{0.3};
  /// Weight of the type-specific direction relative to the class signature.
  double type_signature{1.0};
  double context_strength{1.0};
  double noise_std{0.1};
  double canvas_width{100.0};
  double canvas_height{100.0};
  double min_object_size{25.0};
  double max_object_size{60.0};
  double train_fraction{0.7};
  std::uint64_t seed{0};

  double part_signal_for(int class_id) const;
  void validate() const;
};

/// Where a proposal came from. Kept for tests and diagnostics; training
/// never reads it.
enum class ProposalRole { whole, part, background };

struct ProposalOrigin {
  ProposalRole role{ProposalRole::background};
  int object{-1};  // index into the image's ground truth, -1 for background
  int part_type{-1};
};

struct Split {
  std::vector<ProposalBag> bags;
  GroundTruth gt;
  /// Parallel to bags[i].boxes.
  std::vector<std::vector<ProposalOrigin>> origins;
};

struct Dataset {
  Split train;
  Split test;
  int num_classes() const;
};

/// Deterministic in `config` (including seed). Throws std::invalid_argument
/// on an invalid or geometrically infeasible configuration.
Dataset generate(const SynthConfig& config);

}  // namespace milfuse

#endif  // MILFUSE_SYNTHGEN_HPP_

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

#ifndef MILFUSE_TRAINER_HPP_
#define MILFUSE_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "milfuse/init.hpp"
#include "milfuse/milnet.hpp"

namespace milfuse {

struct TrainConfig {
  double lr_initial{5e-4};
  double lr_drop_factor{0.1};
  int epochs_phase1{10};
  int epochs_phase2{5};
  double momentum{0.9};
  double weight_decay{5e-4};
  int batch_size{2};
  std::uint64_t seed{0};
  int num_branches{3};
  int refine_stages{3};
  double refine_loss_weight{1.0};
  InitSpec init;

  int total_epochs() const { return epochs_phase1 + epochs_phase2; }
  double lr_for_epoch(int epoch) const;  // epoch is 0-based
  void validate() const;
};

struct EpochRecord {
  int epoch{0};  // 1-based
  double loss{0.0};
  std::optional<double> midr;
  std::optional<double> corloc;
  std::optional<double> map;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::string to_csv() const;
};

/// Momentum buffers, one per parameter tensor; starts at zero.
struct SgdState {
  ModelParams velocity;
};

/// v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v.
void sgd_step(ModelParams& params, const ModelParams& grads, SgdState& state, double lr,
              double momentum, double weight_decay);

struct BagGradient {
  double loss{0.0};  // MIL loss plus weighted refinement losses
  ModelParams grad;
};

/// Loss and gradient for one bag: all branches, SCS on the current coupled
/// scores, pseudo labels for each refinement stage (stage 1 from the fused
/// survivors, later stages from the previous stage), refinement losses.
BagGradient bag_gradient(const ProposalBag& bag, const ModelParams& params,
                         double refine_loss_weight);

/// Called after each epoch; may fill in the optional metric columns.
using EpochObserver = std::function<void(const ModelParams&, EpochRecord&)>;

struct TrainResult {
  ModelParams params;
  TrainingLog log;
};

/// Momentum SGD over seeded per-epoch shuffles. Throws std::runtime_error if
/// the loss becomes non-finite.
TrainResult train(std::span<const ProposalBag> bags, const TrainConfig& config,
                  const EpochObserver& observer = {});
TrainResult train(std::span<const ProposalBag> bags, const TrainConfig& config,
                  ModelParams initial, const EpochObserver& observer = {});

}  // namespace milfuse

#endif  // MILFUSE_TRAINER_HPP_

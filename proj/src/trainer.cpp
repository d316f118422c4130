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

#include "milfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "milfuse/fusion.hpp"
#include "milfuse/random.hpp"
#include "milfuse/refine.hpp"

namespace milfuse {

double TrainConfig::lr_for_epoch(int epoch) const {
  return epoch < epochs_phase1 ? lr_initial : lr_initial * lr_drop_factor;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("train config: " + msg);
  };
  require(lr_initial >= 0.0, "lr_initial must be >= 0");
  require(lr_drop_factor >= 0.0, "lr_drop_factor must be >= 0");
  require(epochs_phase1 >= 0 && epochs_phase2 >= 0, "epochs must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(num_branches >= 1, "K must be >= 1");
  require(refine_stages >= 0, "refine_stages must be >= 0");
  require(refine_loss_weight >= 0.0, "refine_loss_weight must be >= 0");
  require(init.gaussian_std > 0.0, "gaussian_std must be > 0");
}

std::string TrainingLog::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,midr,corloc,map\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.loss << ',';
    opt(e.midr);
    os << ',';
    opt(e.corloc);
    os << ',';
    opt(e.map);
    os << '\n';
  }
  return os.str();
}

void sgd_step(ModelParams& params, const ModelParams& grads, SgdState& state, double lr,
              double momentum, double weight_decay) {
  if (!same_shape(params, grads)) throw std::invalid_argument("sgd_step: gradient shape mismatch");
  if (state.velocity.det.empty()) state.velocity = zeros_like(params);
  if (!same_shape(params, state.velocity))
    throw std::invalid_argument("sgd_step: velocity shape mismatch");

  auto w = params.tensors();
  const auto g = grads.tensors();
  auto v = state.velocity.tensors();
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
    w[i] -= lr * v[i];
  }
}

BagGradient bag_gradient(const ProposalBag& bag, const ModelParams& params,
                         double refine_loss_weight) {
  const ForwardTrace trace = forward(bag, params);
  BagGradient out{trace.loss, backward(bag, params, trace)};
  if (params.num_stages() == 0) return out;

  const FusedResult fused = scs(trace.coupled, bag.boxes, bag.labels);
  std::vector<SeedBox> seeds = seeds_from_fusion(fused);
  for (int j = 0; j < params.num_stages(); ++j) {
    const PseudoLabels labels = assign_pseudo_labels(seeds, bag.boxes, params.num_classes());
    const RefineLoss r = refine_loss(params.refine[j], bag.features, labels);
    out.loss += refine_loss_weight * r.loss;
    out.grad.refine[j].weight += refine_loss_weight * r.grad.weight;
    out.grad.refine[j].bias += refine_loss_weight * r.grad.bias;
    if (j + 1 < params.num_stages())
      seeds = seeds_from_stage(stage_scores(params.refine[j], bag.features), bag.boxes,
                               bag.labels);
  }
  return out;
}

TrainResult train(std::span<const ProposalBag> bags, const TrainConfig& config,
                  const EpochObserver& observer) {
  if (bags.empty()) throw std::invalid_argument("train: empty training set");
  InitSpec init = config.init;
  init.seed = config.seed;
  return train(bags, config,
               initialize(bags.front().feature_dim(), bags.front().num_classes(),
                          config.num_branches, config.refine_stages, init),
               observer);
}

TrainResult train(std::span<const ProposalBag> bags, const TrainConfig& config,
                  ModelParams initial, const EpochObserver& observer) {
  config.validate();
  if (bags.empty()) throw std::invalid_argument("train: empty training set");
  initial.validate();
  for (const ProposalBag& bag : bags) {
    bag.validate();
    if (bag.feature_dim() != initial.feature_dim() || bag.num_classes() != initial.num_classes())
      throw std::invalid_argument("train: bag " + bag.image_id +
                                  " is not dimension-compatible with the model");
  }

  TrainResult result{std::move(initial), {}};
  ModelParams& params = result.params;
  SgdState state{zeros_like(params)};
  Rng shuffle_rng(derive_seed(config.seed, streams::kShuffle));
  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.total_epochs(); ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = config.lr_for_epoch(epoch);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      ModelParams grad = zeros_like(params);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const BagGradient g = bag_gradient(bags[order[i]], params, config.refine_loss_weight);
        if (!std::isfinite(g.loss)) {
          std::ostringstream msg;
          msg << "training diverged: non-finite loss " << g.loss << " at epoch " << epoch + 1
              << " on bag " << bags[order[i]].image_id;
          throw std::runtime_error(msg.str());
        }
        batch_loss += g.loss;
        add_scaled(grad, g.grad, 1.0);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& t : grad.tensors()) t *= inv;
      epoch_loss += batch_loss;
      sgd_step(params, grad, state, lr, config.momentum, config.weight_decay);
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.loss = epoch_loss / static_cast<double>(bags.size());
    if (observer) observer(params, record);
    result.log.epochs.push_back(record);
  }
  return result;
}

}  // namespace milfuse

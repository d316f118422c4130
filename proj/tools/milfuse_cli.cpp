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

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "milfuse/harness.hpp"
#include "milfuse/io.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> k;
  std::optional<std::string> init;
  std::optional<int> refine_stages;
  std::optional<std::string> dataset;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "Run seed (dataset seed for gen-data)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--k", f.k, "Number of detection branches (k_max for fusion-curve/ablate)");
  cmd->add_option("--init", f.init, "Detection-branch init")
      ->check(CLI::IsMember({"orthogonal", "gaussian"}));
  cmd->add_option("--refine-stages", f.refine_stages, "Number of refinement stages");
  cmd->add_option("--dataset", f.dataset, "Dataset directory (train.jsonl, test.jsonl)");
}

milfuse::ExperimentConfig resolve(const CommonFlags& f, milfuse::ExperimentKind kind,
                                  bool seed_is_dataset, bool k_is_k_max) {
  milfuse::ExperimentConfig cfg;
  if (!f.config.empty()) cfg = milfuse::load_config(f.config);
  cfg.experiment = kind;
  if (f.seed) (seed_is_dataset ? cfg.synth.seed : cfg.train.seed) = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.k) (k_is_k_max ? cfg.k_max : cfg.train.num_branches) = *f.k;
  if (f.init) cfg.train.init.strategy = milfuse::parse_init_strategy(*f.init);
  if (f.refine_stages) cfg.train.refine_stages = *f.refine_stages;
  if (f.dataset) cfg.dataset = *f.dataset;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"milfuse: multi-branch MIL detection with surrounded candidates suppression"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, eval_f, inst_f, curve_f, abl_f;
  std::string checkpoint;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen, gen_f);
  auto* trn = app.add_subcommand("train", "Train a model and evaluate it");
  add_common(trn, train_f);
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(evl, eval_f);
  evl->add_option("--params", checkpoint, "Checkpoint (params.json)")->required();
  auto* inst = app.add_subcommand("instability", "Instability of single-branch detectors");
  add_common(inst, inst_f);
  auto* curve = app.add_subcommand("fusion-curve", "CorLoc / mIDR of fused detectors versus K");
  add_common(curve, curve_f);
  auto* abl = app.add_subcommand("ablate", "Branch count x initialization grid");
  add_common(abl, abl_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  using milfuse::ExperimentKind;
  try {
    if (*gen) {
      const auto cfg = resolve(gen_f, ExperimentKind::train_eval, true, false);
      const auto ds = milfuse::generate(cfg.synth);
      milfuse::save_dataset(cfg.out_dir, ds);
      milfuse::write_text_file(std::filesystem::path(cfg.out_dir) / "config.json",
                               milfuse::config_to_json(cfg) + "\n");
      std::cout << "wrote " << ds.train.bags.size() << " train / " << ds.test.bags.size()
                << " test images to " << cfg.out_dir << "\n";
    } else if (*trn) {
      const auto cfg = resolve(train_f, ExperimentKind::train_eval, false, false);
      const auto ds = milfuse::load_or_generate(cfg);
      const auto report = milfuse::run_train_eval(cfg, ds);
      milfuse::write_train_eval(cfg.out_dir, cfg, ds, report);
      std::cout << "mAP " << report.eval.map.mean << "  CorLoc " << report.eval.corloc.mean
                << "\n";
    } else if (*evl) {
      const auto cfg = resolve(eval_f, ExperimentKind::train_eval, false, false);
      const auto ds = milfuse::load_or_generate(cfg);
      const auto params = milfuse::load_params(checkpoint);
      const auto report = milfuse::evaluate(params, ds);
      milfuse::write_eval(cfg.out_dir, cfg, ds, report);
      std::cout << "mAP " << report.map.mean << "  CorLoc " << report.corloc.mean << "\n";
    } else if (*inst) {
      const auto cfg = resolve(inst_f, ExperimentKind::instability, false, false);
      const auto report = milfuse::run_instability(cfg);
      milfuse::write_instability(cfg.out_dir, cfg, report);
      std::cout << "mIDR " << report.midr << "  spearman(IDR, CorLoc) "
                << report.spearman_idr_corloc << "  mean CorLoc " << report.corloc.mean << "\n";
    } else if (*curve) {
      const auto cfg = resolve(curve_f, ExperimentKind::fusion_curve, false, true);
      const auto report = milfuse::run_fusion_curve(cfg);
      milfuse::write_fusion_curve(cfg.out_dir, cfg, report);
      std::cout << report.to_csv();
    } else if (*abl) {
      const auto cfg = resolve(abl_f, ExperimentKind::ablation, false, true);
      const auto report = milfuse::run_ablation(cfg);
      milfuse::write_ablation(cfg.out_dir, cfg, report);
      std::cout << report.summary_csv();
    }
  } catch (const std::exception& e) {
    std::cerr << "milfuse: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

// Experiment runners: instability study, fusion-gain curve, branch/init
// ablation and single train/eval runs. Each runner is a pure function of its
// ExperimentConfig; the write_* helpers put the results on disk.

#ifndef MILFUSE_HARNESS_HPP_
#define MILFUSE_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "milfuse/fusion.hpp"
#include "milfuse/metrics.hpp"
#include "milfuse/synthgen.hpp"
#include "milfuse/trainer.hpp"

namespace milfuse {

enum class ExperimentKind { instability, fusion_curve, ablation, train_eval };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind experiment{ExperimentKind::train_eval};
  /// Directory holding train.jsonl / test.jsonl; empty means generate from `synth`.
  std::string dataset;
  SynthConfig synth;
  TrainConfig train;
  int repetitions{10};
  int samples{10};
  int k_max{5};
  std::vector<InitStrategy> ablation_inits{InitStrategy::orthogonal, InitStrategy::gaussian};
  std::string out_dir{"out"};

  void validate() const;
};

/// JSON text, all fields present.
std::string config_to_json(const ExperimentConfig& config);
/// Fields present in `text` override those of `base`; unknown keys are errors.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// SHA-256 of the canonical JSON form.
std::string config_hash(const ExperimentConfig& config);

/// Parallel run count from MILFUSE_JOBS (default: hardware concurrency).
int parallel_jobs();

/// Runs fn(0..count-1) on up to `jobs` threads. Exceptions are rethrown
/// (lowest index first) after all workers finish.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

Dataset load_or_generate(const ExperimentConfig& config);

/// Seeds for repeated runs: train.seed + r.
std::vector<std::uint64_t> repetition_seeds(const ExperimentConfig& config);

/// Per-image coupled scores of every branch of a trained model.
std::vector<std::vector<ScoreMatrix>> branch_scores(const ModelParams& params,
                                                    std::span<const ProposalBag> bags);

/// Top box per (image, positive class) by a per-image C x n score matrix.
TopBoxTable top_boxes(std::span<const Eigen::MatrixXd> scores, std::span<const ProposalBag> bags);

/// Top box per (image, positive class) under the model's final scores.
TopBoxTable model_top_boxes(const ModelParams& params, std::span<const ProposalBag> bags);

/// All post-NMS detections of a model over a split.
std::vector<Detection> detect_all(const ModelParams& params, std::span<const ProposalBag> bags);

struct EvalReport {
  ClassMetricReport map;     // test split
  ClassMetricReport corloc;  // train split
  std::vector<Detection> test_detections;
};

EvalReport evaluate(const ModelParams& params, const Dataset& dataset,
                    ApMode mode = ApMode::eleven_point);

// ---- instability ---------------------------------------------------------

struct InstabilityReport {
  ClassMetricReport idr;     // per class, averaged over sampled pairs
  ClassMetricReport corloc;  // per class, averaged over detectors
  double midr{0.0};
  double spearman_idr_corloc{0.0};
  std::vector<std::pair<int, int>> pairs;
};

/// Core of run_instability over precomputed per-detector top boxes. Samples
/// `samples` distinct detector pairs without replacement (all pairs if fewer).
InstabilityReport instability_from_tables(std::span<const TopBoxTable> detectors,
                                          const GroundTruth& gt, int num_classes, int samples,
                                          std::uint64_t seed);

/// Trains `repetitions` single-branch, refinement-free detectors on the train
/// split and measures their pairwise instability.
InstabilityReport run_instability(const ExperimentConfig& config);

// ---- fusion curve --------------------------------------------------------

struct FusionCurvePoint {
  int k{0};
  double corloc{0.0};  // mean CorLoc of fused results
  double midr{0.0};    // mean mIDR between two independently sampled fused results
};

struct FusionCurveReport {
  std::vector<FusionCurvePoint> points;
  double single_corloc{0.0};  // mean CorLoc over the whole detector pool
  std::string to_csv() const;
};

/// `detectors[d][i]` holds detector d's coupled scores on image i. For each
/// K, draws `samples` pairs of K-subsets (disjoint when the pool allows),
/// fuses each subset per image with SCS and keeps the top survivor.
FusionCurveReport fusion_curve_from_scores(std::span<const std::vector<ScoreMatrix>> detectors,
                                           const Split& split, int k_max, int samples,
                                           std::uint64_t seed);

FusionCurveReport run_fusion_curve(const ExperimentConfig& config);

// ---- ablation ------------------------------------------------------------

struct AblationRow {
  int k{0};
  InitStrategy init{InitStrategy::gaussian};
  std::uint64_t seed{0};
  double map{0.0};
  double corloc{0.0};
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::string to_csv() const;
  std::string summary_csv() const;
  /// Rows of one grid cell in seed order.
  std::vector<AblationRow> cell(int k, InitStrategy init) const;
};

/// Grid over K = 1..k_max and every strategy in `ablation_inits`, one full
/// model (train.refine_stages stages) per seed.
AblationReport run_ablation(const ExperimentConfig& config);

// ---- train / eval --------------------------------------------------------

struct TrainEvalReport {
  ModelParams params;
  TrainingLog log;
  EvalReport eval;
};

TrainEvalReport run_train_eval(const ExperimentConfig& config);
TrainEvalReport run_train_eval(const ExperimentConfig& config, const Dataset& dataset);

// ---- output --------------------------------------------------------------

void write_instability(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const InstabilityReport& report);
void write_fusion_curve(const std::filesystem::path& dir, const ExperimentConfig& config,
                        const FusionCurveReport& report);
void write_ablation(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const AblationReport& report);
void write_eval(const std::filesystem::path& dir, const ExperimentConfig& config,
                const Dataset& dataset, const EvalReport& report);
void write_train_eval(const std::filesystem::path& dir, const ExperimentConfig& config,
                      const Dataset& dataset, const TrainEvalReport& report);

}  // namespace milfuse

#endif  // MILFUSE_HARNESS_HPP_

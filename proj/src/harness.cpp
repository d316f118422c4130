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

#include "milfuse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "milfuse/io.hpp"
#include "milfuse/random.hpp"
#include "milfuse/refine.hpp"

namespace milfuse {

using nlohmann::json;

// ---- config --------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::instability: return "instability";
    case ExperimentKind::fusion_curve: return "fusion_curve";
    case ExperimentKind::ablation: return "ablation";
    case ExperimentKind::train_eval: return "train_eval";
  }
  return "train_eval";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "instability") return ExperimentKind::instability;
  if (name == "fusion_curve") return ExperimentKind::fusion_curve;
  if (name == "ablation") return ExperimentKind::ablation;
  if (name == "train_eval") return ExperimentKind::train_eval;
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) synth.validate();
  train.validate();
  if (repetitions < 1) throw std::invalid_argument("config: repetitions must be >= 1");
  if (experiment == ExperimentKind::instability && repetitions < 2)
    throw std::invalid_argument("config: instability needs repetitions >= 2 (IDR compares pairs)");
  if (samples < 1) throw std::invalid_argument("config: samples must be >= 1");
  if (k_max < 1) throw std::invalid_argument("config: k_max must be >= 1");
  if (ablation_inits.empty()) throw std::invalid_argument("config: ablation_inits is empty");
}

namespace {

json synth_to_json(const SynthConfig& s) {
  return {{"num_classes", s.num_classes},
          {"feature_dim", s.feature_dim},
          {"images", s.images},
          {"min_objects", s.min_objects},
          {"max_objects", s.max_objects},
          {"parts_per_object", s.parts_per_object},
          {"part_types", s.part_types},
          {"background_proposals", s.background_proposals},
          {"whole_signal", s.whole_signal},
          {"part_signal", s.part_signal},
          {"part_signal_spread", s.part_signal_spread},
          {"type_signature", s.type_signature},
          {"context_strength", s.context_strength},
          {"noise_std", s.noise_std},
          {"canvas_width", s.canvas_width},
          {"canvas_height", s.canvas_height},
          {"min_object_size", s.min_object_size},
          {"max_object_size", s.max_object_size},
          {"train_fraction", s.train_fraction},
          {"seed", s.seed}};
}

json train_to_json(const TrainConfig& t) {
  return {{"lr_initial", t.lr_initial},
          {"lr_drop_factor", t.lr_drop_factor},
          {"epochs_phase1", t.epochs_phase1},
          {"epochs_phase2", t.epochs_phase2},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"seed", t.seed},
          {"k", t.num_branches},
          {"refine_stages", t.refine_stages},
          {"refine_loss_weight", t.refine_loss_weight},
          {"init", {{"strategy", to_string(t.init.strategy)}, {"gaussian_std", t.init.gaussian_std}}}};
}

// Reads j[key] into `field` when present, then forgets the key so leftovers
// can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument("config: " + where_ + " must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) unread_.insert(it.key());
  }

  template <typename T>
  void get(const char* key, T& field) {
    if (!j_.contains(key)) return;
    unread_.erase(key);
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: bad value for " + where_ + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    unread_.erase(key);
    return &j_.at(key);
  }

  void finish() const {
    if (!unread_.empty())
      throw std::invalid_argument("config: unknown key '" + where_ + *unread_.begin() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> unread_;
};

void read_synth(const json& j, SynthConfig& s) {
  Reader r(j, "synth.");
  r.get("num_classes", s.num_classes);
  r.get("feature_dim", s.feature_dim);
  r.get("images", s.images);
  r.get("min_objects", s.min_objects);
  r.get("max_objects", s.max_objects);
  r.get("parts_per_object", s.parts_per_object);
  r.get("part_types", s.part_types);
  r.get("background_proposals", s.background_proposals);
  r.get("whole_signal", s.whole_signal);
  r.get("part_signal", s.part_signal);
  r.get("part_signal_spread", s.part_signal_spread);
  r.get("type_signature", s.type_signature);
  r.get("context_strength", s.context_strength);
  r.get("noise_std", s.noise_std);
  r.get("canvas_width", s.canvas_width);
  r.get("canvas_height", s.canvas_height);
  r.get("min_object_size", s.min_object_size);
  r.get("max_object_size", s.max_object_size);
  r.get("train_fraction", s.train_fraction);
  r.get("seed", s.seed);
  r.finish();
}

void read_train(const json& j, TrainConfig& t) {
  Reader r(j, "train.");
  r.get("lr_initial", t.lr_initial);
  r.get("lr_drop_factor", t.lr_drop_factor);
  r.get("epochs_phase1", t.epochs_phase1);
  r.get("epochs_phase2", t.epochs_phase2);
  r.get("momentum", t.momentum);
  r.get("weight_decay", t.weight_decay);
  r.get("batch_size", t.batch_size);
  r.get("seed", t.seed);
  r.get("k", t.num_branches);
  r.get("refine_stages", t.refine_stages);
  r.get("refine_loss_weight", t.refine_loss_weight);
  if (const json* init = r.child("init")) {
    Reader ri(*init, "train.init.");
    std::string strategy = to_string(t.init.strategy);
    ri.get("strategy", strategy);
    t.init.strategy = parse_init_strategy(strategy);
    ri.get("gaussian_std", t.init.gaussian_std);
    ri.finish();
  }
  r.finish();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json inits = json::array();
  for (InitStrategy s : c.ablation_inits) inits.push_back(to_string(s));
  json j{{"experiment", to_string(c.experiment)},
         {"dataset", c.dataset},
         {"repetitions", c.repetitions},
         {"samples", c.samples},
         {"k_max", c.k_max},
         {"ablation_inits", inits},
         {"out", c.out_dir},
         {"synth", synth_to_json(c.synth)},
         {"train", train_to_json(c.train)}};
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  Reader r(j, "");
  std::string experiment = to_string(base.experiment);
  r.get("experiment", experiment);
  base.experiment = parse_experiment_kind(experiment);
  r.get("dataset", base.dataset);
  r.get("repetitions", base.repetitions);
  r.get("samples", base.samples);
  r.get("k_max", base.k_max);
  r.get("out", base.out_dir);
  if (const json* inits = r.child("ablation_inits")) {
    base.ablation_inits.clear();
    for (const json& s : *inits) base.ablation_inits.push_back(parse_init_strategy(s.get<std::string>()));
  }
  if (const json* s = r.child("synth")) read_synth(*s, base.synth);
  if (const json* t = r.child("train")) read_train(*t, base.train);
  r.finish();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_text_file(path));
}

std::string config_hash(const ExperimentConfig& config) {
  return sha256_hex(json::parse(config_to_json(config)).dump());
}

// ---- parallel runs -------------------------------------------------------

int parallel_jobs() {
  if (const char* env = std::getenv("MILFUSE_JOBS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  jobs = std::clamp(jobs, 1, count);
  std::vector<std::exception_ptr> errors(count);
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (int i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : workers) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---- shared evaluation ---------------------------------------------------

Dataset load_or_generate(const ExperimentConfig& config) {
  if (config.dataset.empty()) return generate(config.synth);
  return load_dataset(config.dataset);
}

std::vector<std::uint64_t> repetition_seeds(const ExperimentConfig& config) {
  std::vector<std::uint64_t> seeds(config.repetitions);
  for (int r = 0; r < config.repetitions; ++r) seeds[r] = config.train.seed + r;
  return seeds;
}

std::vector<std::vector<ScoreMatrix>> branch_scores(const ModelParams& params,
                                                    std::span<const ProposalBag> bags) {
  std::vector<std::vector<ScoreMatrix>> out;
  out.reserve(bags.size());
  for (const ProposalBag& bag : bags) out.push_back(forward(bag, params).coupled);
  return out;
}

TopBoxTable top_boxes(std::span<const Eigen::MatrixXd> scores, std::span<const ProposalBag> bags) {
  if (scores.size() != bags.size()) throw std::invalid_argument("top_boxes: size mismatch");
  TopBoxTable table(bags.size());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const ProposalBag& bag = bags[i];
    table[i].resize(bag.num_classes());
    const ScoreMatrix sm{scores[i], ScoreKind::coupled};
    for (int c = 0; c < bag.num_classes(); ++c)
      if (bag.labels[c] == 1.0) table[i][c] = top_box(sm, bag.boxes, c).scored.box;
  }
  return table;
}

TopBoxTable model_top_boxes(const ModelParams& params, std::span<const ProposalBag> bags) {
  std::vector<Eigen::MatrixXd> scores;
  scores.reserve(bags.size());
  for (const ProposalBag& bag : bags) scores.push_back(final_scores(params, bag.features));
  return top_boxes(scores, bags);
}

std::vector<Detection> detect_all(const ModelParams& params, std::span<const ProposalBag> bags) {
  std::vector<Detection> dets;
  for (std::size_t i = 0; i < bags.size(); ++i)
    for (const ScoredBox& sb : inference_scores(params, bags[i].features, bags[i].boxes))
      dets.push_back({i, sb});
  return dets;
}

EvalReport evaluate(const ModelParams& params, const Dataset& dataset, ApMode mode) {
  const int c = dataset.num_classes();
  if (dataset.test.gt.images.size() != dataset.test.bags.size() ||
      dataset.train.gt.images.size() != dataset.train.bags.size())
    throw std::invalid_argument("evaluate: dataset is missing ground truth");
  EvalReport r;
  r.test_detections = detect_all(params, dataset.test.bags);
  r.map = mean_average_precision(r.test_detections, dataset.test.gt, c, mode);
  r.corloc = corloc(model_top_boxes(params, dataset.train.bags), dataset.train.gt, c);
  return r;
}

namespace {

void require_ground_truth(const Dataset& ds) {
  auto has_any = [](const Split& s) {
    return std::any_of(s.gt.images.begin(), s.gt.images.end(),
                       [](const auto& objs) { return !objs.empty(); });
  };
  if (!has_any(ds.train) || !has_any(ds.test))
    throw std::invalid_argument("dataset has no ground truth; evaluation needs gt boxes");
}

std::vector<ModelParams> train_pool(const Split& split, const TrainConfig& base,
                                    std::span<const std::uint64_t> seeds) {
  std::vector<ModelParams> pool(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), parallel_jobs(), [&](int r) {
    TrainConfig cfg = base;
    cfg.seed = seeds[r];
    pool[r] = train(split.bags, cfg).params;
  });
  return pool;
}

TrainConfig single_branch(TrainConfig cfg) {
  cfg.num_branches = 1;
  cfg.refine_stages = 0;
  return cfg;
}

}  // namespace

// ---- instability ---------------------------------------------------------

InstabilityReport instability_from_tables(std::span<const TopBoxTable> detectors,
                                          const GroundTruth& gt, int num_classes, int samples,
                                          std::uint64_t seed) {
  const int n = static_cast<int>(detectors.size());
  if (n < 2) throw std::invalid_argument("instability needs at least two detectors");

  std::vector<std::pair<int, int>> all_pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) all_pairs.emplace_back(a, b);
  Rng rng(derive_seed(seed, streams::kSampling));
  std::shuffle(all_pairs.begin(), all_pairs.end(), rng);
  all_pairs.resize(std::min<std::size_t>(all_pairs.size(), static_cast<std::size_t>(samples)));

  InstabilityReport report;
  report.pairs = all_pairs;
  std::vector<double> idr_sum(num_classes, 0.0);
  std::vector<int> idr_count(num_classes, 0);
  for (const auto& [a, b] : all_pairs) {
    const ClassMetricReport r = idr_report(detectors[a], detectors[b], num_classes);
    for (const auto& [c, v] : r.per_class) {
      idr_sum[c] += v;
      ++idr_count[c];
    }
  }
  std::vector<double> corloc_sum(num_classes, 0.0);
  std::vector<int> corloc_count(num_classes, 0);
  for (const TopBoxTable& d : detectors)
    for (const auto& [c, v] : corloc(d, gt, num_classes).per_class) {
      corloc_sum[c] += v;
      ++corloc_count[c];
    }

  std::vector<std::pair<int, double>> idr_pc, corloc_pc;
  std::vector<double> xs, ys;
  for (int c = 0; c < num_classes; ++c) {
    if (idr_count[c] > 0) idr_pc.emplace_back(c, idr_sum[c] / idr_count[c]);
    if (corloc_count[c] > 0) corloc_pc.emplace_back(c, corloc_sum[c] / corloc_count[c]);
    if (idr_count[c] > 0 && corloc_count[c] > 0) {
      xs.push_back(idr_sum[c] / idr_count[c]);
      ys.push_back(corloc_sum[c] / corloc_count[c]);
    }
  }
  report.idr = make_report(std::move(idr_pc));
  report.corloc = make_report(std::move(corloc_pc));
  report.midr = report.idr.mean;
  report.spearman_idr_corloc = xs.size() >= 2 ? spearman(xs, ys) : 0.0;
  return report;
}

InstabilityReport run_instability(const ExperimentConfig& config) {
  config.validate();
  if (config.repetitions < 2)
    throw std::invalid_argument("instability needs repetitions >= 2 (IDR compares pairs)");
  const Dataset ds = load_or_generate(config);
  require_ground_truth(ds);
  const auto seeds = repetition_seeds(config);
  const auto pool = train_pool(ds.train, single_branch(config.train), seeds);
  std::vector<TopBoxTable> tables;
  for (const ModelParams& p : pool) tables.push_back(model_top_boxes(p, ds.train.bags));
  return instability_from_tables(tables, ds.train.gt, ds.num_classes(), config.samples,
                                 config.train.seed);
}

// ---- fusion curve --------------------------------------------------------

std::string FusionCurveReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "k,corloc,midr\n";
  for (const auto& p : points) os << p.k << ',' << p.corloc << ',' << p.midr << '\n';
  return os.str();
}

namespace {

TopBoxTable fused_tops(std::span<const std::vector<ScoreMatrix>> detectors,
                       std::span<const int> subset, const Split& split) {
  TopBoxTable table(split.bags.size());
  std::vector<ScoreMatrix> scores(subset.size());
  for (std::size_t i = 0; i < split.bags.size(); ++i) {
    const ProposalBag& bag = split.bags[i];
    for (std::size_t s = 0; s < subset.size(); ++s) scores[s] = detectors[subset[s]][i];
    const FusedResult fused = scs(scores, bag.boxes, bag.labels);
    table[i].resize(bag.num_classes());
    for (int c = 0; c < bag.num_classes(); ++c)
      if (bag.labels[c] == 1.0) table[i][c] = fused_top_box(fused, c).box;
  }
  return table;
}

}  // namespace

FusionCurveReport fusion_curve_from_scores(std::span<const std::vector<ScoreMatrix>> detectors,
                                           const Split& split, int k_max, int samples,
                                           std::uint64_t seed) {
  const int pool = static_cast<int>(detectors.size());
  if (k_max < 1) throw std::invalid_argument("fusion curve: k_max must be >= 1");
  if (pool < k_max)
    throw std::invalid_argument("fusion curve: pool of " + std::to_string(pool) +
                                " detectors is smaller than k_max = " + std::to_string(k_max));
  const int c_count = split.bags.empty() ? 0 : split.bags.front().num_classes();
  FusionCurveReport report;

  std::vector<int> all(pool);
  std::iota(all.begin(), all.end(), 0);
  double single = 0.0;
  for (int d = 0; d < pool; ++d)
    single += corloc(fused_tops(detectors, std::span<const int>(&all[d], 1), split), split.gt,
                     c_count).mean;
  report.single_corloc = single / pool;

  Rng rng(derive_seed(seed, streams::kSampling + 1));
  for (int k = 1; k <= k_max; ++k) {
    double corloc_sum = 0.0, midr_sum = 0.0;
    for (int s = 0; s < samples; ++s) {
      std::vector<int> perm = all;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<int> a(perm.begin(), perm.begin() + k);
      std::vector<int> b;
      if (2 * k <= pool) {
        b.assign(perm.begin() + k, perm.begin() + 2 * k);
      } else {
        // Pool too small for disjoint subsets: draw B independently, distinct from A.
        do {
          std::shuffle(perm.begin(), perm.end(), rng);
          b.assign(perm.begin(), perm.begin() + k);
          std::sort(b.begin(), b.end());
          std::sort(a.begin(), a.end());
        } while (a == b && k < pool);
      }
      const TopBoxTable ta = fused_tops(detectors, a, split);
      const TopBoxTable tb = fused_tops(detectors, b, split);
      corloc_sum += 0.5 * (corloc(ta, split.gt, c_count).mean + corloc(tb, split.gt, c_count).mean);
      midr_sum += idr_report(ta, tb, c_count).mean;
    }
    report.points.push_back({k, corloc_sum / samples, midr_sum / samples});
  }
  return report;
}

FusionCurveReport run_fusion_curve(const ExperimentConfig& config) {
  config.validate();
  if (config.repetitions < config.k_max)
    throw std::invalid_argument("fusion curve: repetitions (pool size) must be >= k_max");
  const Dataset ds = load_or_generate(config);
  require_ground_truth(ds);
  const auto seeds = repetition_seeds(config);
  const auto pool = train_pool(ds.train, single_branch(config.train), seeds);
  std::vector<std::vector<ScoreMatrix>> scores;
  for (const ModelParams& p : pool) {
    std::vector<ScoreMatrix> per_image;
    for (auto& branches : branch_scores(p, ds.train.bags)) per_image.push_back(branches.front());
    scores.push_back(std::move(per_image));
  }
  return fusion_curve_from_scores(scores, ds.train, config.k_max, config.samples,
                                  config.train.seed);
}

// ---- ablation ------------------------------------------------------------

std::string AblationReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "k,init,seed,map,corloc\n";
  for (const auto& r : rows)
    os << r.k << ',' << to_string(r.init) << ',' << r.seed << ',' << r.map << ',' << r.corloc
       << '\n';
  return os.str();
}

std::vector<AblationRow> AblationReport::cell(int k, InitStrategy init) const {
  std::vector<AblationRow> out;
  for (const auto& r : rows)
    if (r.k == k && r.init == init) out.push_back(r);
  return out;
}

std::string AblationReport::summary_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "k,init,runs,map_mean,map_std,corloc_mean,corloc_std\n";
  std::vector<std::pair<int, InitStrategy>> keys;
  for (const auto& r : rows)
    if (std::find(keys.begin(), keys.end(), std::make_pair(r.k, r.init)) == keys.end())
      keys.emplace_back(r.k, r.init);
  for (const auto& [k, init] : keys) {
    const auto cellrows = cell(k, init);
    const double n = static_cast<double>(cellrows.size());
    double mm = 0.0, cm = 0.0;
    for (const auto& r : cellrows) {
      mm += r.map / n;
      cm += r.corloc / n;
    }
    double mv = 0.0, cv = 0.0;
    for (const auto& r : cellrows) {
      mv += (r.map - mm) * (r.map - mm) / n;
      cv += (r.corloc - cm) * (r.corloc - cm) / n;
    }
    os << k << ',' << to_string(init) << ',' << cellrows.size() << ',' << mm << ','
       << std::sqrt(mv) << ',' << cm << ',' << std::sqrt(cv) << '\n';
  }
  return os.str();
}

AblationReport run_ablation(const ExperimentConfig& config) {
  config.validate();
  const Dataset ds = load_or_generate(config);
  require_ground_truth(ds);
  const auto seeds = repetition_seeds(config);

  AblationReport report;
  for (int k = 1; k <= config.k_max; ++k)
    for (InitStrategy init : config.ablation_inits)
      for (std::uint64_t seed : seeds) report.rows.push_back({k, init, seed, 0.0, 0.0});

  parallel_for(static_cast<int>(report.rows.size()), parallel_jobs(), [&](int i) {
    AblationRow& row = report.rows[i];
    TrainConfig cfg = config.train;
    cfg.num_branches = row.k;
    cfg.init.strategy = row.init;
    cfg.seed = row.seed;
    const ModelParams params = train(ds.train.bags, cfg).params;
    const EvalReport eval = evaluate(params, ds);
    row.map = eval.map.mean;
    row.corloc = eval.corloc.mean;
  });
  return report;
}

// ---- train / eval --------------------------------------------------------

TrainEvalReport run_train_eval(const ExperimentConfig& config) {
  config.validate();
  return run_train_eval(config, load_or_generate(config));
}

TrainEvalReport run_train_eval(const ExperimentConfig& config, const Dataset& dataset) {
  require_ground_truth(dataset);
  const int c = dataset.num_classes();
  auto observer = [&](const ModelParams& params, EpochRecord& rec) {
    rec.corloc = corloc(model_top_boxes(params, dataset.train.bags), dataset.train.gt, c).mean;
    rec.map = mean_average_precision(detect_all(params, dataset.test.bags), dataset.test.gt, c).mean;
  };
  TrainResult trained = train(dataset.train.bags, config.train, observer);
  TrainEvalReport report;
  report.eval = evaluate(trained.params, dataset);
  report.params = std::move(trained.params);
  report.log = std::move(trained.log);
  return report;
}

// ---- output --------------------------------------------------------------

namespace {

void write_config(const std::filesystem::path& dir, const ExperimentConfig& config) {
  write_text_file(dir / "config.json", config_to_json(config) + "\n");
}

json report_json(const ClassMetricReport& r) { return json::parse(r.to_json()); }

}  // namespace

void write_instability(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const InstabilityReport& report) {
  write_config(dir, config);
  write_text_file(dir / "instability_idr.csv", report.idr.to_csv());
  write_text_file(dir / "instability_corloc.csv", report.corloc.to_csv());
  json pairs = json::array();
  for (const auto& [a, b] : report.pairs) pairs.push_back({a, b});
  json j{{"config_hash", config_hash(config)},
         {"midr", report.midr},
         {"spearman_idr_corloc", report.spearman_idr_corloc},
         {"idr", report_json(report.idr)},
         {"corloc", report_json(report.corloc)},
         {"pairs", pairs}};
  write_text_file(dir / "instability.json", j.dump(2) + "\n");
}

void write_fusion_curve(const std::filesystem::path& dir, const ExperimentConfig& config,
                        const FusionCurveReport& report) {
  write_config(dir, config);
  write_text_file(dir / "fusion_curve.csv", report.to_csv());
  json points = json::array();
  for (const auto& p : report.points)
    points.push_back({{"k", p.k}, {"corloc", p.corloc}, {"midr", p.midr}});
  json j{{"config_hash", config_hash(config)},
         {"single_corloc", report.single_corloc},
         {"points", points}};
  write_text_file(dir / "fusion_curve.json", j.dump(2) + "\n");
}

void write_ablation(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const AblationReport& report) {
  write_config(dir, config);
  write_text_file(dir / "ablation.csv", report.to_csv());
  write_text_file(dir / "ablation_summary.csv", report.summary_csv());
  json j{{"config_hash", config_hash(config)}, {"rows", report.rows.size()}};
  write_text_file(dir / "ablation.json", j.dump(2) + "\n");
}

void write_eval(const std::filesystem::path& dir, const ExperimentConfig& config,
                const Dataset& dataset, const EvalReport& report) {
  write_config(dir, config);
  write_text_file(dir / "map.csv", report.map.to_csv());
  write_text_file(dir / "map.json", report.map.to_json() + "\n");
  write_text_file(dir / "corloc.csv", report.corloc.to_csv());
  write_text_file(dir / "corloc.json", report.corloc.to_json() + "\n");
  write_text_file(dir / "detections.jsonl",
                  detections_to_jsonl(dataset.test.bags, report.test_detections));
  json j{{"config_hash", config_hash(config)},
         {"map", report.map.mean},
         {"corloc", report.corloc.mean}};
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
}

void write_train_eval(const std::filesystem::path& dir, const ExperimentConfig& config,
                      const Dataset& dataset, const TrainEvalReport& report) {
  write_eval(dir, config, dataset, report.eval);
  save_params(dir / "params.json", report.params);
  write_text_file(dir / "training_log.csv", report.log.to_csv());
  std::string fused;
  for (const ProposalBag& bag : dataset.train.bags)
    fused += fused_to_jsonl(bag.image_id,
                            scs(forward(bag, report.params).coupled, bag.boxes, bag.labels));
  write_text_file(dir / "fused.jsonl", fused);
}

}  // namespace milfuse

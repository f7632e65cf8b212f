#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lntune/data/frame_store.hpp"
#include "lntune/data/splits.hpp"
#include "lntune/evaluator/benchmark.hpp"
#include "lntune/trainer/trainer.hpp"

namespace lntune {

struct TrainedRun {
  FloatModel model;
  TrainingLog log;
};

/// Trains a fresh model; the returned model holds the best epoch's parameters.
inline TrainedRun train_model(const TrainConfig& cfg, const data::FrameStore& train, const data::FrameStore* val,
                              const std::filesystem::path& out_dir = {}) {
  TrainedRun run{make_model(cfg), {}};
  Trainer t(run.model, train, val, cfg, out_dir);
  run.log = t.run();
  return run;
}

struct MeanSpread {
  double mean = 0.0;
  double spread = 0.0;  // population standard deviation
};

inline MeanSpread mean_spread(const std::vector<double>& v) {
  MeanSpread m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.spread += (x - m.mean) * (x - m.mean);
  m.spread = std::sqrt(m.spread / static_cast<double>(v.size()));
  return m;
}

// ---- ablation ----

inline constexpr int kAblationSetups = 5;

inline std::string ablation_label(int setup) {
  static const char* names[] = {"baseline (head only)", "+ LN tuning", "+ L2 norm", "+ align/uniform", "+ slerp"};
  if (setup < 1 || setup > kAblationSetups) throw ConfigError("ablation setup must be 1..5");
  return names[setup - 1];
}

/// Config of an ablation setup. Setup 5 is `base` itself; each lower setup
/// removes one more component.
inline TrainConfig ablation_setup(const TrainConfig& base, int setup) {
  ablation_label(setup);
  TrainConfig c = base;
  if (setup <= 4) {
    c.slerp_extension = false;
    c.extended_batch_size = c.batch_size;
  }
  if (setup <= 3) c.loss_weights = {0.0, 0.0};
  if (setup <= 2) c.l2_normalize = false;
  if (setup <= 1) c.policy = ParamPolicy::head_only();
  c.validate();
  return c;
}

struct AblationRow {
  int setup = 0;
  std::string label;
  /// Seed-averaged AUROC per test set, then the mean over test sets.
  std::vector<double> auroc;
  double mean = 0.0;
  /// auroc_by_seed[s][d]
  std::vector<std::vector<double>> auroc_by_seed;
  std::vector<double> best_val_by_seed;
  std::string error;
};

struct AblationTable {
  std::vector<std::string> datasets;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
};

inline Json to_json(const AblationTable& t) {
  Json j;
  j["kind"] = "ablation";
  j["datasets"] = t.datasets;
  j["seeds"] = t.seeds;
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json x;
    x["setup"] = r.setup;
    x["label"] = r.label;
    x["auroc"] = r.auroc;
    x["mean"] = r.error.empty() ? Json(r.mean) : Json(nullptr);
    x["auroc_by_seed"] = r.auroc_by_seed;
    x["best_val_by_seed"] = r.best_val_by_seed;
    x["error"] = r.error.empty() ? Json(nullptr) : Json(r.error);
    rows.push_back(x);
  }
  j["rows"] = rows;
  return j;
}

/// Trains setups 1..5 for every seed and evaluates each on all test sets.
/// A failing setup records its error and the others still run.
inline AblationTable run_ablation(const data::FrameStore& train, const data::FrameStore* val,
                                  const std::vector<const data::FrameStore*>& tests, const TrainConfig& base,
                                  std::vector<std::uint64_t> seeds = {}, std::vector<int> setups = {1, 2, 3, 4, 5}) {
  if (seeds.empty()) seeds.push_back(base.seed);
  AblationTable table;
  table.seeds = seeds;
  for (const auto* t : tests) table.datasets.push_back(t->name);
  for (int setup : setups) {
    AblationRow row;
    row.setup = setup;
    try {
      row.label = ablation_label(setup);
      for (auto seed : seeds) {
        auto cfg = ablation_setup(base, setup);
        cfg.seed = seed;
        const auto run = train_model(cfg, train, val);
        std::vector<double> a;
        for (const auto* t : tests) a.push_back(video_auroc(score_videos(run.model, *t, cfg.eval_batch_size)));
        row.auroc_by_seed.push_back(a);
        row.best_val_by_seed.push_back(run.log.best_val_auroc);
      }
      row.auroc.assign(tests.size(), 0.0);
      for (const auto& a : row.auroc_by_seed)
        for (std::size_t d = 0; d < a.size(); ++d) row.auroc[d] += a[d] / static_cast<double>(seeds.size());
      row.mean = mean_spread(row.auroc).mean;
    } catch (const Error& e) {
      row.error = e.what();
      std::cerr << "ablation setup " << setup << " failed: " << e.what() << "\n";
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---- paired vs unpaired ----

struct ConditionCurves {
  /// [trial][epoch]
  std::vector<std::vector<double>> train_auroc;
  std::vector<std::vector<double>> val_auroc;
  std::vector<double> best_val;
  std::vector<int> best_epoch;
  /// Train minus validation AUROC at the best-validation epoch.
  std::vector<double> gap_at_best;

  MeanSpread best_val_stats() const { return mean_spread(best_val); }
  MeanSpread gap_stats() const { return mean_spread(gap_at_best); }
  /// Per-epoch mean and spread over trials.
  std::vector<MeanSpread> curve(bool train) const {
    const auto& src = train ? train_auroc : val_auroc;
    std::vector<MeanSpread> out;
    if (src.empty()) return out;
    for (std::size_t e = 0; e < src.front().size(); ++e) {
      std::vector<double> col;
      for (const auto& trial : src) col.push_back(trial[e]);
      out.push_back(mean_spread(col));
    }
    return out;
  }
};

struct PairingResult {
  int trials = 0;
  ConditionCurves paired;
  ConditionCurves unpaired;
  /// mean best-val AUROC (paired) minus mean best-val AUROC (unpaired)
  double best_val_gap() const { return paired.best_val_stats().mean - unpaired.best_val_stats().mean; }
};

inline Json to_json(const ConditionCurves& c) {
  Json j;
  j["train_auroc"] = c.train_auroc;
  j["val_auroc"] = c.val_auroc;
  j["best_val"] = c.best_val;
  j["best_epoch"] = c.best_epoch;
  j["gap_at_best"] = c.gap_at_best;
  j["best_val_mean"] = c.best_val_stats().mean;
  j["best_val_spread"] = c.best_val_stats().spread;
  j["gap_at_best_mean"] = c.gap_stats().mean;
  return j;
}

inline Json to_json(const PairingResult& r) {
  Json j;
  j["kind"] = "pairing";
  j["trials"] = r.trials;
  j["paired"] = to_json(r.paired);
  j["unpaired"] = to_json(r.unpaired);
  j["best_val_gap"] = r.best_val_gap();
  return j;
}

/// For trial t, builds the paired and unpaired splits with trial seed t and
/// trains one model on each with run seed cfg.seed + t, recording train and
/// validation AUROC after every epoch.
inline PairingResult run_pairing_experiment(const data::DatasetManifest& manifest, const data::FrameStore& all,
                                            const data::FrameStore& val, int n_trials, const TrainConfig& cfg) {
  if (n_trials < 1) throw ConfigError("pairing experiment needs at least one trial");
  PairingResult out;
  out.trials = n_trials;
  for (int t = 0; t < n_trials; ++t) {
    for (int cond = 0; cond < 2; ++cond) {
      const auto split = cond == 0 ? data::build_paired_split(manifest, static_cast<std::uint64_t>(t))
                                   : data::build_unpaired_split(manifest, static_cast<std::uint64_t>(t));
      const auto store = all.subset(split);
      auto c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(t);
      c.eval_train_auroc = true;
      const auto run = train_model(c, store, &val);
      auto& curves = cond == 0 ? out.paired : out.unpaired;
      std::vector<double> tr, va;
      for (const auto& e : run.log.epochs) {
        tr.push_back(*e.train_auroc);
        va.push_back(*e.val_auroc);
      }
      const auto best = static_cast<std::size_t>(run.log.best_epoch);
      curves.best_val.push_back(run.log.best_val_auroc);
      curves.best_epoch.push_back(run.log.best_epoch);
      curves.gap_at_best.push_back(tr[best] - va[best]);
      curves.train_auroc.push_back(std::move(tr));
      curves.val_auroc.push_back(std::move(va));
    }
  }
  return out;
}

// ---- difficulty over years ----

struct NamedSet {
  std::string name;
  int year = 0;
  const data::FrameStore* store = nullptr;
};

struct YearsResult {
  std::vector<std::string> train_names;
  std::vector<int> train_years;
  std::vector<std::string> test_names;
  std::vector<int> test_years;
  /// auroc[model][test]
  std::vector<std::vector<double>> auroc;
  /// Column of each model's own dataset, or -1.
  std::vector<int> in_dataset;
};

inline Json to_json(const YearsResult& r) {
  Json j;
  j["kind"] = "years";
  j["train"] = r.train_names;
  j["train_years"] = r.train_years;
  j["test"] = r.test_names;
  j["test_years"] = r.test_years;
  j["auroc"] = r.auroc;
  j["in_dataset"] = r.in_dataset;
  return j;
}

/// One model per training set, each evaluated on every test set (ordered by
/// year). A test set counts as in-dataset when its name matches the
/// training set's name.
inline YearsResult run_years_experiment(const std::vector<NamedSet>& train, const std::vector<const data::FrameStore*>& val,
                                        std::vector<NamedSet> tests, const TrainConfig& cfg) {
  if (train.size() < 2) throw ConfigError("years experiment needs at least two training sets");
  if (!val.empty() && val.size() != train.size()) throw ConfigError("years experiment: one validation set per training set");
  std::stable_sort(tests.begin(), tests.end(), [](const NamedSet& a, const NamedSet& b) { return a.year < b.year; });
  YearsResult r;
  for (const auto& t : tests) {
    r.test_names.push_back(t.name);
    r.test_years.push_back(t.year);
  }
  for (std::size_t m = 0; m < train.size(); ++m) {
    r.train_names.push_back(train[m].name);
    r.train_years.push_back(train[m].year);
    const auto run = train_model(cfg, *train[m].store, val.empty() ? nullptr : val[m]);
    std::vector<double> row;
    int own = -1;
    for (std::size_t k = 0; k < tests.size(); ++k) {
      row.push_back(video_auroc(score_videos(run.model, *tests[k].store, cfg.eval_batch_size)));
      if (tests[k].name == train[m].name) own = static_cast<int>(k);
    }
    r.auroc.push_back(std::move(row));
    r.in_dataset.push_back(own);
  }
  return r;
}

}  // namespace lntune

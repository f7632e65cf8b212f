// lntune command-line entry point.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lntune/data/ingest.hpp"
#include "lntune/data/synthetic.hpp"
#include "lntune/evaluator/emit.hpp"

namespace fs = std::filesystem;
using namespace lntune;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr const char* kOutputRootEnv = "LNTUNE_OUTPUT_ROOT";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

Json read_json_file(const std::string& path) {
  require_file(path, "config file");
  std::ifstream in(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw UsageError("cannot parse " + path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) { write_file_bytes(path, text); }

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- output location ----

struct OutputFlags {
  std::string out_dir;
  std::string out_root;
  std::string run_id;

  void add(CLI::App* app) {
    app->add_option("--out", out_dir, "Output directory (overrides --out-root/--run-id)");
    app->add_option("--out-root", out_root,
                    std::string("Parent of run directories (default: $") + kOutputRootEnv + " or ./runs)");
    app->add_option("--run-id", run_id, "Run directory name (default: <command>-<UTC time>-s<seed>)");
  }

  /// Creates and returns the run directory. Generated ids get a numeric
  /// suffix when the directory already exists, so every invocation has its
  /// own directory.
  fs::path resolve(const std::string& command, std::uint64_t seed) const {
    fs::path dir;
    if (!out_dir.empty()) {
      dir = out_dir;
    } else {
      fs::path root = out_root;
      if (root.empty()) {
        const char* env = std::getenv(kOutputRootEnv);
        root = env && *env ? env : "runs";
      }
      if (!run_id.empty()) {
        dir = root / run_id;
      } else {
        std::string stamp;
        for (char c : timestamp_utc())
          if (c != '-' && c != ':') stamp += c;
        const std::string base = command + "-" + stamp + "-s" + std::to_string(seed);
        dir = root / base;
        for (int k = 2; fs::exists(dir); ++k) dir = root / (base + "-" + std::to_string(k));
      }
    }
    fs::create_directories(dir);
    return dir;
  }
};

// ---- training flags ----

struct TrainFlags {
  std::string config;
  std::optional<int> batch_size, extended_batch_size, warmup_epochs, decay_epochs, max_cycles, eval_batch_size;
  std::optional<double> lr_min, lr_max, alpha, beta, weight_decay;
  std::optional<std::string> policy, precision, weights;
  std::optional<std::uint64_t> seed, backbone_seed;
  std::optional<int> image_size, patch_size, width, depth, heads;
  bool no_l2 = false, no_slerp = false, class_balanced = false, allow_weight_decay = false, no_augment = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "TrainConfig JSON file; flags below override its fields");
    app->add_option("--batch-size", batch_size, "TrainConfig.batch_size (default 128)");
    app->add_option("--extended-batch-size", extended_batch_size, "TrainConfig.extended_batch_size (default 1024)");
    app->add_option("--lr-min", lr_min, "TrainConfig.lr_min (default 1e-5)");
    app->add_option("--lr-max", lr_max, "TrainConfig.lr_max (default 3e-4)");
    app->add_option("--warmup-epochs", warmup_epochs, "TrainConfig.warmup_epochs (default 1)");
    app->add_option("--decay-epochs", decay_epochs, "TrainConfig.decay_epochs (default 9)");
    app->add_option("--cycles", max_cycles, "TrainConfig.max_cycles (default 2)");
    app->add_option("--policy", policy, "TrainConfig.policy: head_only|ln_only|bias_only|low_rank[:r]|full");
    app->add_option("--precision", precision, "TrainConfig.precision: full|reduced");
    app->add_option("--alpha", alpha, "TrainConfig.loss_weights.alpha, alignment weight (default 0.1)");
    app->add_option("--beta", beta, "TrainConfig.loss_weights.beta, uniformity weight (default 0.5)");
    app->add_option("--weight-decay", weight_decay, "TrainConfig.weight_decay (default 0; needs --allow-weight-decay)");
    app->add_flag("--allow-weight-decay", allow_weight_decay, "TrainConfig.allow_weight_decay = true");
    app->add_option("--seed", seed, "TrainConfig.seed: run seed (order, augmentation, slerp, head init)");
    app->add_option("--backbone-seed", backbone_seed, "TrainConfig.backbone_seed: frozen tiny backbone init");
    app->add_option("--weights", weights, "TrainConfig.weights_path: pretrained encoder safetensors");
    app->add_flag("--no-l2", no_l2, "TrainConfig.l2_normalize = false");
    app->add_flag("--no-slerp", no_slerp, "TrainConfig.slerp_extension = false");
    app->add_flag("--class-balanced", class_balanced, "TrainConfig.class_balanced = true");
    app->add_flag("--no-augment", no_augment, "TrainConfig.augment: all probabilities 0");
    app->add_option("--eval-batch-size", eval_batch_size, "TrainConfig.eval_batch_size (default 256)");
    app->add_option("--image-size", image_size, "TrainConfig.encoder.image_size");
    app->add_option("--patch-size", patch_size, "TrainConfig.encoder.patch_size");
    app->add_option("--width", width, "TrainConfig.encoder.width");
    app->add_option("--depth", depth, "TrainConfig.encoder.depth");
    app->add_option("--heads", heads, "TrainConfig.encoder.heads");
  }

  TrainConfig resolve() const {
    Json j = config.empty() ? Json::object() : read_json_file(config);
    TrainConfig c = TrainConfig::from_json(j);
    if (batch_size) c.batch_size = *batch_size;
    if (extended_batch_size) c.extended_batch_size = *extended_batch_size;
    if (lr_min) c.lr_min = *lr_min;
    if (lr_max) c.lr_max = *lr_max;
    if (warmup_epochs) c.warmup_epochs = *warmup_epochs;
    if (decay_epochs) c.decay_epochs = *decay_epochs;
    if (max_cycles) c.max_cycles = *max_cycles;
    if (policy) c.policy = parse_policy(*policy);
    if (precision) c.precision = parse_precision(*precision);
    if (alpha) c.loss_weights.alpha = *alpha;
    if (beta) c.loss_weights.beta = *beta;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (allow_weight_decay) c.allow_weight_decay = true;
    if (seed) c.seed = *seed;
    if (backbone_seed) c.backbone_seed = *backbone_seed;
    if (weights) c.weights_path = *weights;
    if (no_l2) {
      c.l2_normalize = false;
      c.loss_weights = {0.0, 0.0};
      c.slerp_extension = false;
    }
    if (no_slerp) c.slerp_extension = false;
    if (!c.slerp_extension) c.extended_batch_size = c.batch_size;
    if (class_balanced) c.class_balanced = true;
    if (no_augment) c.augment = data::AugmentConfig::none();
    if (eval_batch_size) c.eval_batch_size = *eval_batch_size;
    if (image_size) c.encoder.image_size = *image_size;
    if (patch_size) c.encoder.patch_size = *patch_size;
    if (width) c.encoder.width = *width;
    if (depth) c.encoder.depth = *depth;
    if (heads) c.encoder.heads = *heads;
    c.validate();
    return c;
  }
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

data::DatasetManifest load_manifest(const std::string& path) {
  require_file(path, "manifest");
  return data::read_manifest(path);
}

/// Stores the resolved configuration next to the run's outputs.
void write_run_config(const fs::path& dir, const std::string& command, const Json& config, const Json& inputs) {
  Json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["inputs"] = inputs;
  j["config"] = config;
  write_json(dir / "config.json", j);
}

// ---- commands ----

struct PreprocessArgs {
  std::string synthetic, in, config, name, dataset, split = "test", detector;
  std::optional<int> frames, crop, year;
  std::optional<double> margin;
  bool no_align = false;
  OutputFlags out;
};

int cmd_preprocess(const PreprocessArgs& a) {
  if (a.synthetic.empty() == a.in.empty()) throw UsageError("give exactly one of --synthetic or --in");
  if (!a.synthetic.empty()) {
    auto spec = data::SyntheticSpec::from_json(read_json_file(a.synthetic));
    if (!a.name.empty()) spec.name = a.name;
    if (a.frames) spec.frames_per_video = *a.frames;
    if (a.crop) spec.image_size = *a.crop;
    const auto dir = a.out.resolve("preprocess", spec.world_seed);
    const auto m = data::generate_synthetic_dataset(spec, dir);
    data::write_manifest(dir / "manifest.jsonl", m);
    write_run_config(dir, "preprocess", spec.to_json(), {{"synthetic", a.synthetic}});
    std::cout << "manifest: " << (dir / "manifest.jsonl").string() << "\n"
              << "videos: " << m.records.size() << " (" << m.count(data::Label::Real) << " real, "
              << m.count(data::Label::Fake) << " fake), frames: " << m.frame_count() << "\n";
    return 0;
  }
  if (!fs::is_directory(a.in)) throw UsageError("input directory not found: " + a.in);
  data::PreprocessConfig cfg = a.config.empty() ? data::PreprocessConfig{} : data::PreprocessConfig::from_json(read_json_file(a.config));
  if (a.frames) cfg.frames_per_video = *a.frames;
  if (a.crop) cfg.crop_size = *a.crop;
  if (a.margin) cfg.bbox_margin = *a.margin;
  if (!a.detector.empty()) cfg.detector = a.detector;
  if (a.no_align) cfg.alignment = false;
  cfg.validate();
  const auto detector = data::make_detector(cfg.detector);
  data::IngestOptions opt;
  opt.name = a.name.empty() ? fs::path(a.in).filename().string() : a.name;
  opt.dataset = a.dataset;
  opt.split = data::parse_split(a.split);
  opt.year = a.year.value_or(0);
  const auto dir = a.out.resolve("preprocess", 0);
  data::IngestSummary sum;
  const auto m = data::ingest_directory(a.in, dir, cfg, *detector, opt, &sum);
  data::write_manifest(dir / "manifest.jsonl", m);
  write_run_config(dir, "preprocess", cfg.to_json(), {{"in", a.in}});
  std::cout << "manifest: " << (dir / "manifest.jsonl").string() << "\n"
            << "videos: " << sum.videos << ", sampled frames: " << sum.sampled_frames
            << ", frames without a face: " << sum.skipped_frames << ", excluded videos: " << sum.excluded.size() << "\n";
  for (const auto& id : sum.excluded) std::cout << "  excluded: " << id << "\n";
  return 0;
}

struct TrainArgs {
  std::string train, val;
  bool resume = false;
  TrainFlags flags;
  OutputFlags out;
};

int cmd_train(const TrainArgs& a) {
  const auto cfg = a.flags.resolve();
  const auto train_m = load_manifest(a.train);
  std::optional<data::DatasetManifest> val_m;
  if (!a.val.empty()) val_m = load_manifest(a.val);
  const auto dir = a.out.resolve("train", cfg.seed);
  write_run_config(dir, "train", cfg.to_json(), {{"train", a.train}, {"val", a.val}});
  const auto train = data::FrameStore::load(train_m);
  std::optional<data::FrameStore> val;
  if (val_m) val = data::FrameStore::load(*val_m, true);
  auto model = make_model(cfg);
  write_parameter_audit(model, dir / "parameter_audit.txt");
  Trainer t(model, train, val ? &*val : nullptr, cfg, dir);
  t.extra_meta["preprocessing_fingerprint"] = train_m.preprocessing_fingerprint;
  t.extra_meta["config_fingerprint"] = cfg.fingerprint();
  if (a.resume) {
    if (!fs::exists(dir / "last.ckpt")) throw UsageError("--resume: no last.ckpt in " + dir.string());
    const auto last = load_checkpoint(dir / "last.ckpt", &cfg.encoder);
    if (last.meta.value("config", Json()) != cfg.to_json())
      throw ConfigError("--resume: the checkpoint was written with a different configuration");
    std::optional<Checkpoint> best;
    if (fs::exists(dir / "best.ckpt")) best = load_checkpoint(dir / "best.ckpt", &cfg.encoder);
    t.load_state(last, best ? &*best : nullptr);
    std::cout << "resuming at step " << t.step() << " of " << t.total_steps() << "\n";
  }
  const auto& log = t.run();
  Json summary;
  summary["best_epoch"] = log.best_epoch;
  summary["best_val_auroc"] = std::isnan(log.best_val_auroc) ? Json(nullptr) : Json(log.best_val_auroc);
  summary["model_fingerprint"] = model_fingerprint(model);
  summary["config_fingerprint"] = cfg.fingerprint();
  summary["preprocessing_fingerprint"] = train_m.preprocessing_fingerprint;
  summary["steps"] = t.total_steps();
  write_json(dir / "summary.json", summary);
  std::cout << "output: " << dir.string() << "\n";
  if (std::isnan(log.best_val_auroc))
    std::cout << "no validation set; kept the last epoch\n";
  else
    std::printf("best validation AUROC %.17g at epoch %d\n", log.best_val_auroc, log.best_epoch);
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::vector<std::string> data;
  bool allow_mismatch = false;
  int batch = 256;
  OutputFlags out;
};

int cmd_eval(const EvalArgs& a) {
  require_file(a.ckpt, "checkpoint");
  const auto files = split_list(a.data);
  if (files.empty()) throw UsageError("--data needs at least one manifest");
  std::vector<data::DatasetManifest> ms;
  for (const auto& f : files) ms.push_back(load_manifest(f));
  const auto ck = load_checkpoint(a.ckpt);
  BenchmarkOptions opt;
  opt.expected_preprocessing = ck.meta.value("preprocessing_fingerprint", std::string());
  opt.config_fingerprint = ck.meta.value("config_fingerprint", std::string());
  opt.hard_fail = !a.allow_mismatch;
  opt.batch = a.batch;
  BenchmarkResult b;
  try {
    b = run_benchmark(ck.model, ms, opt);
  } catch (const FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "the test data was preprocessed differently from the training data; rerun preprocess with the "
                 "training settings or pass --allow-mismatch\n";
    return kExitRuntime;
  }
  const auto dir = a.out.resolve("eval", 0);
  write_run_config(dir, "eval", Json::object(), {{"ckpt", a.ckpt}, {"data", files}});
  for (std::size_t i = 0; i < b.reports.size(); ++i) {
    std::string safe;
    for (char c : b.reports[i].dataset) safe += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    write_json(dir / ("report_" + std::to_string(i) + "_" + safe + ".json"), to_json(b.reports[i]));
  }
  write_json(dir / "benchmark.json", to_json(b));
  write_text(dir / "benchmark.csv", benchmark_csv(b));
  std::cout << benchmark_csv(b) << "output: " << dir.string() << "\n";
  return 0;
}

struct AblateArgs {
  std::string train, val;
  std::vector<std::string> tests;
  std::vector<std::uint64_t> seeds;
  std::vector<int> setups{1, 2, 3, 4, 5};
  TrainFlags flags;
  OutputFlags out;
};

int cmd_ablate(const AblateArgs& a) {
  const auto base = a.flags.resolve();
  const auto test_files = split_list(a.tests);
  if (test_files.empty()) throw UsageError("--test needs at least one manifest");
  const auto train = data::FrameStore::load(load_manifest(a.train));
  std::optional<data::FrameStore> val;
  if (!a.val.empty()) val = data::FrameStore::load(load_manifest(a.val), true);
  std::vector<data::FrameStore> tests;
  for (const auto& f : test_files) tests.push_back(data::FrameStore::load(load_manifest(f), true));
  std::vector<const data::FrameStore*> test_ptrs;
  for (const auto& t : tests) test_ptrs.push_back(&t);
  const auto dir = a.out.resolve("ablate", base.seed);
  write_run_config(dir, "ablate", base.to_json(), {{"train", a.train}, {"val", a.val}, {"test", test_files}, {"seeds", a.seeds}});
  const auto table = run_ablation(train, val ? &*val : nullptr, test_ptrs, base, a.seeds, a.setups);
  write_json(dir / "ablation.json", to_json(table));
  write_text(dir / "ablation.csv", ablation_csv(table));
  std::cout << ablation_csv(table) << "output: " << dir.string() << "\n";
  for (const auto& r : table.rows)
    if (!r.error.empty()) return kExitRuntime;
  return 0;
}

struct PairArgs {
  std::string data, val;
  int trials = 10;
  TrainFlags flags;
  OutputFlags out;
};

int cmd_pair_exp(const PairArgs& a) {
  const auto cfg = a.flags.resolve();
  if (a.trials < 1) throw UsageError("--trials must be >= 1");
  const auto m = load_manifest(a.data);
  const auto all = data::FrameStore::load(m);
  const auto val = data::FrameStore::load(load_manifest(a.val), true);
  const auto dir = a.out.resolve("pair-exp", cfg.seed);
  write_run_config(dir, "pair-exp", cfg.to_json(), {{"data", a.data}, {"val", a.val}, {"trials", a.trials}});
  const auto r = run_pairing_experiment(m, all, val, a.trials, cfg);
  write_json(dir / "pairing.json", to_json(r));
  write_text(dir / "pairing_curves.csv", pairing_curves_csv(r));
  write_text(dir / "pairing_summary.csv", pairing_summary_csv(r));
  write_text(dir / "pairing.svg", pairing_svg(r));
  std::cout << pairing_summary_csv(r) << "output: " << dir.string() << "\n";
  return 0;
}

struct YearsArgs {
  std::vector<std::string> train, tests;
  TrainFlags flags;
  OutputFlags out;
};

int manifest_year(const data::DatasetManifest& m) {
  for (const auto& r : m.records)
    if (r.year != 0) return r.year;
  return 0;
}

int cmd_years(const YearsArgs& a) {
  const auto cfg = a.flags.resolve();
  const auto train_files = split_list(a.train), test_files = split_list(a.tests);
  if (train_files.size() < 2) throw UsageError("--train needs at least two manifests");
  if (test_files.empty()) throw UsageError("--test needs at least one manifest");
  // Each training manifest trains on its train split and selects on its val
  // split when present; test manifests use their test split when present.
  std::vector<data::FrameStore> train_stores, val_stores, test_stores;
  std::vector<int> train_years, test_years;
  std::vector<std::string> train_names, test_names;
  bool all_val = true;
  for (const auto& f : train_files) {
    const auto m = load_manifest(f);
    auto tr = m.subset(data::Split::Train);
    if (tr.records.empty()) tr = m;
    const auto va = m.subset(data::Split::Val);
    all_val = all_val && !va.records.empty();
    train_stores.push_back(data::FrameStore::load(tr));
    val_stores.push_back(va.records.empty() ? data::FrameStore{} : data::FrameStore::load(va, true));
    train_names.push_back(m.records.empty() ? m.name : m.records.front().dataset);
    train_years.push_back(manifest_year(m));
  }
  for (const auto& f : test_files) {
    const auto m = load_manifest(f);
    auto te = m.subset(data::Split::Test);
    if (te.records.empty()) te = m;
    test_stores.push_back(data::FrameStore::load(te, true));
    test_names.push_back(m.records.empty() ? m.name : m.records.front().dataset);
    test_years.push_back(manifest_year(m));
  }
  std::vector<NamedSet> train, tests;
  std::vector<const data::FrameStore*> vals;
  for (std::size_t i = 0; i < train_stores.size(); ++i) {
    train.push_back({train_names[i], train_years[i], &train_stores[i]});
    if (all_val) vals.push_back(&val_stores[i]);
  }
  for (std::size_t i = 0; i < test_stores.size(); ++i) tests.push_back({test_names[i], test_years[i], &test_stores[i]});
  const auto dir = a.out.resolve("years", cfg.seed);
  write_run_config(dir, "years", cfg.to_json(), {{"train", train_files}, {"test", test_files}});
  const auto r = run_years_experiment(train, vals, tests, cfg);
  write_json(dir / "years.json", to_json(r));
  write_text(dir / "years.csv", years_csv(r));
  write_text(dir / "years.svg", years_svg(r));
  std::cout << years_csv(r) << "output: " << dir.string() << "\n";
  return 0;
}

struct ReportArgs {
  std::string in, out;
};

int cmd_report(const ReportArgs& a) {
  const auto table = render_report(read_json_file(a.in));
  if (!a.out.empty())
    write_text(a.out, table);
  else
    std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lntune: layer-norm tuning of vision transformers for face-forgery detection"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Crop faces from videos (or render a synthetic set) and write a manifest");
  c_pre->add_option("--synthetic", pre.synthetic, "SyntheticSpec JSON file");
  c_pre->add_option("--in", pre.in, "Raw dataset directory with real/ and fake/ (optional sources.json)");
  c_pre->add_option("--config", pre.config, "PreprocessConfig JSON file; flags below override it");
  c_pre->add_option("--frames", pre.frames, "PreprocessConfig.frames_per_video (default 32) / SyntheticSpec.frames_per_video");
  c_pre->add_option("--crop", pre.crop, "PreprocessConfig.crop_size (default 256) / SyntheticSpec.image_size");
  c_pre->add_option("--margin", pre.margin, "PreprocessConfig.bbox_margin (default 1.3)");
  c_pre->add_option("--detector", pre.detector, "PreprocessConfig.detector: registered plug-in (stub, full_frame)");
  c_pre->add_flag("--no-align", pre.no_align, "PreprocessConfig.alignment = false");
  c_pre->add_option("--name", pre.name, "Manifest name (default: input directory name / SyntheticSpec.name)");
  c_pre->add_option("--dataset", pre.dataset, "VideoRecord.dataset (default: manifest name)");
  c_pre->add_option("--split", pre.split, "VideoRecord.split: train|val|test (default test)");
  c_pre->add_option("--year", pre.year, "VideoRecord.year");
  pre.out.add(c_pre);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a detector; writes best.ckpt, last.ckpt and training_log.jsonl");
  c_train->add_option("--train", tr.train, "Training manifest")->required();
  c_train->add_option("--val", tr.val, "Validation manifest (model selection by video AUROC)");
  c_train->add_flag("--resume", tr.resume, "Continue from last.ckpt in the output directory");
  tr.flags.add(c_train);
  tr.out.add(c_train);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score test manifests with a checkpoint");
  c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
  c_eval->add_option("--data", ev.data, "Test manifests (comma separated or repeated)")->required();
  c_eval->add_flag("--allow-mismatch", ev.allow_mismatch, "Warn instead of failing on preprocessing fingerprint mismatch");
  c_eval->add_option("--batch", ev.batch, "Frames per forward pass (default 256)");
  ev.out.add(c_eval);

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Train and evaluate ablation setups 1-5 (5 = the given config)");
  c_ab->add_option("--train", ab.train, "Training manifest")->required();
  c_ab->add_option("--val", ab.val, "Validation manifest");
  c_ab->add_option("--test", ab.tests, "Test manifests (comma separated or repeated)")->required();
  c_ab->add_option("--seeds", ab.seeds, "Run seeds to average over (default: TrainConfig.seed)")->delimiter(',');
  c_ab->add_option("--setups", ab.setups, "Setups to run (default 1,2,3,4,5)")->delimiter(',');
  ab.flags.add(c_ab);
  ab.out.add(c_ab);

  PairArgs pe;
  auto* c_pe = app.add_subcommand("pair-exp", "Paired vs unpaired training-set experiment");
  c_pe->add_option("--data", pe.data, "Manifest with source links to split")->required();
  c_pe->add_option("--val", pe.val, "Validation manifest")->required();
  c_pe->add_option("--trials", pe.trials, "Number of random splits (default 10)");
  pe.flags.add(c_pe);
  pe.out.add(c_pe);

  YearsArgs yr;
  auto* c_yr = app.add_subcommand("years", "Train one model per dataset and evaluate across datasets ordered by year");
  c_yr->add_option("--train", yr.train, "Training manifests, one per dataset")->required();
  c_yr->add_option("--test", yr.tests, "Test manifests")->required();
  yr.flags.add(c_yr);
  yr.out.add(c_yr);

  ReportArgs rp;
  auto* c_rp = app.add_subcommand("report", "Render a JSON artifact (benchmark, ablation, pairing, years) as a table");
  c_rp->add_option("--in", rp.in, "Artifact JSON file")->required();
  c_rp->add_option("--out", rp.out, "Write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_pre) return cmd_preprocess(pre);
    if (*c_train) return cmd_train(tr);
    if (*c_eval) return cmd_eval(ev);
    if (*c_ab) return cmd_ablate(ab);
    if (*c_pe) return cmd_pair_exp(pe);
    if (*c_yr) return cmd_years(yr);
    if (*c_rp) return cmd_report(rp);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedPolicy& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

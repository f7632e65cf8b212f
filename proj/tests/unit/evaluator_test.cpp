#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "lntune/data/synthetic.hpp"
#include "lntune/evaluator/emit.hpp"
#include "synthetic_store.hpp"
#include "test_util.hpp"

namespace lntune {
namespace {

namespace fs = std::filesystem;

EncoderSpec small_spec() {
  EncoderSpec s;
  s.image_size = 8;
  s.patch_size = 4;
  s.width = 8;
  s.depth = 2;
  s.heads = 2;
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.encoder = small_spec();
  c.batch_size = 8;
  c.extended_batch_size = 32;
  c.decay_epochs = 1;
  c.max_cycles = 1;
  c.precision = Precision::Full;
  c.augment = data::AugmentConfig::none();
  return c;
}

data::SyntheticSpec small_synth(const std::string& name, std::vector<int> gens, int offset = 0, int ids = 3) {
  data::SyntheticSpec sp;
  sp.name = name;
  sp.dataset = name;
  sp.identities = ids;
  sp.identity_offset = offset;
  sp.frames_per_video = 2;
  sp.image_size = 8;
  sp.generators = std::move(gens);
  return sp;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lntune_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Report, AurocRecomputableAndPermutationInvariant) {
  const auto store = testing::synthetic_store(small_synth("s", {0, 1}));
  auto model = make_model(small_config());
  const auto r = evaluate_store(model, store);
  EXPECT_EQ(r.n_real, 3);
  EXPECT_EQ(r.n_fake, 6);
  EXPECT_EQ(video_auroc(r.per_video), r.auroc);
  for (const auto& v : r.per_video) {
    double s = 0;
    for (double p : v.frame_probs) s += p;
    EXPECT_NEAR(v.video_prob, s / static_cast<double>(v.frame_probs.size()), 1e-12);
  }
  // reversed video order and reversed frames within each video
  auto videos = r.per_video;
  std::reverse(videos.begin(), videos.end());
  for (auto& v : videos) {
    std::reverse(v.frame_probs.begin(), v.frame_probs.end());
    v.video_prob = aggregate_video(v.frame_probs);
  }
  EXPECT_NEAR(video_auroc(videos), r.auroc, 1e-15);
  const auto back = report_from_json(to_json(r));
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
}

TEST(Benchmark, MeanRowDeterminismAndFingerprints) {
  const auto dir = temp_dir("bench");
  const auto m1 = data::generate_synthetic_dataset(small_synth("a", {0}), dir / "a");
  const auto m2 = data::generate_synthetic_dataset(small_synth("b", {1}, 10), dir / "b");
  auto model = make_model(small_config());
  BenchmarkOptions opt;
  opt.expected_preprocessing = m1.preprocessing_fingerprint;
  const auto b1 = run_benchmark(model, {m1, m2}, opt);
  ASSERT_EQ(b1.reports.size(), 2u);
  EXPECT_DOUBLE_EQ(b1.mean_auroc, (b1.reports[0].auroc + b1.reports[1].auroc) / 2);
  const auto b2 = run_benchmark(model, {m1, m2}, opt);
  EXPECT_EQ(to_json(b1).dump(), to_json(b2).dump());
  EXPECT_EQ(b1.reports[0].model_fingerprint, model_fingerprint(model));

  auto other = m2;
  other.preprocessing_fingerprint = "deadbeef";
  EXPECT_THROW(run_benchmark(model, {other}, opt), FingerprintMismatch);
  opt.hard_fail = false;
  const auto warned = run_benchmark(model, {other}, opt);
  EXPECT_EQ(warned.reports[0].warnings.size(), 1u);
}

TEST(Benchmark, MissingFramesAreSkippedAndTallied) {
  const auto dir = temp_dir("missing");
  const auto m = data::generate_synthetic_dataset(small_synth("a", {0}), dir);
  fs::remove(m.resolve(m.records[0].frame_paths[0]));
  for (const auto& f : m.records[1].frame_paths) fs::remove(m.resolve(f));
  auto model = make_model(small_config());
  const auto b = run_benchmark(model, {m});
  EXPECT_EQ(b.reports[0].missing_frames, 3);
  EXPECT_EQ(b.reports[0].excluded_videos, 1);
  EXPECT_EQ(b.reports[0].n_real + b.reports[0].n_fake, 5);
  BenchmarkOptions strict;
  strict.skip_missing = false;
  EXPECT_THROW(run_benchmark(model, {m}, strict), IoError);
}

TEST(Ablation, SetupDefinitions) {
  const auto base = small_config();
  const auto s1 = ablation_setup(base, 1);
  EXPECT_EQ(s1.policy, ParamPolicy::head_only());
  EXPECT_FALSE(s1.l2_normalize);
  EXPECT_EQ(s1.loss_weights.alpha, 0.0);
  EXPECT_EQ(s1.loss_weights.beta, 0.0);
  EXPECT_FALSE(s1.slerp_extension);
  const auto s2 = ablation_setup(base, 2);
  EXPECT_EQ(s2.policy, ParamPolicy::ln_only());
  EXPECT_FALSE(s2.l2_normalize);
  EXPECT_TRUE(ablation_setup(base, 3).l2_normalize);
  EXPECT_EQ(ablation_setup(base, 4).loss_weights.alpha, 0.1);
  EXPECT_FALSE(ablation_setup(base, 4).slerp_extension);
  EXPECT_EQ(ablation_setup(base, 5).to_json(), base.to_json());
  EXPECT_EQ(ablation_setup(TrainConfig{}, 5).to_json(), TrainConfig{}.to_json());
}

TEST(Ablation, TableShapeAndFailingRowContinues) {
  const auto train = testing::synthetic_store(small_synth("train", {0}));
  const auto val = testing::synthetic_store(small_synth("val", {1}, 20));
  const auto t1 = testing::synthetic_store(small_synth("t1", {2}, 40));
  const auto t2 = testing::synthetic_store(small_synth("t2", {3}, 60));
  const auto table = run_ablation(train, &val, {&t1, &t2}, small_config(), {0}, {1, 2, 3, 4, 5, 6});
  ASSERT_EQ(table.rows.size(), 6u);
  for (int k = 0; k < 5; ++k) {
    EXPECT_TRUE(table.rows[static_cast<std::size_t>(k)].error.empty());
    EXPECT_EQ(table.rows[static_cast<std::size_t>(k)].auroc.size(), 2u);
  }
  EXPECT_FALSE(table.rows[5].error.empty());
  const auto csv = ablation_csv(table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_NE(csv.find("setup,components,t1,t2,mean"), std::string::npos);
  EXPECT_EQ(render_report(to_json(table)), csv);
}

TEST(Pairing, CurvesHaveOneEntryPerTrialAndEpoch) {
  const auto dir = temp_dir("pairing");
  const auto m = data::generate_synthetic_dataset(small_synth("p", {0}, 0, 6), dir);
  const auto all = data::FrameStore::load(m);
  const auto val = testing::synthetic_store(small_synth("v", {0}, 100));
  auto cfg = small_config();
  const auto r = run_pairing_experiment(m, all, val, 2, cfg);
  for (const auto* c : {&r.paired, &r.unpaired}) {
    ASSERT_EQ(c->train_auroc.size(), 2u);
    EXPECT_EQ(c->val_auroc[0].size(), static_cast<std::size_t>(cfg.total_epochs()));
    EXPECT_EQ(c->best_val.size(), 2u);
    EXPECT_EQ(c->curve(true).size(), static_cast<std::size_t>(cfg.total_epochs()));
  }
  EXPECT_DOUBLE_EQ(r.best_val_gap(), r.paired.best_val_stats().mean - r.unpaired.best_val_stats().mean);
  EXPECT_NE(pairing_svg(r).find("<polyline"), std::string::npos);
  EXPECT_NE(render_report(to_json(r)).find("paired_minus_unpaired"), std::string::npos);

  auto broken = m;
  broken.records.erase(broken.records.begin());  // drop a real that a fake points to
  EXPECT_THROW(run_pairing_experiment(broken, all, val, 1, cfg), MissingSourceLinks);
}

TEST(Years, MatrixShapeOrderAndInDatasetMarks) {
  const auto a = testing::synthetic_store(small_synth("A", {0}));
  const auto b = testing::synthetic_store(small_synth("B", {1}, 10));
  const auto ta = testing::synthetic_store(small_synth("A", {0}, 20));
  const auto tb = testing::synthetic_store(small_synth("B", {1}, 30));
  const auto tc = testing::synthetic_store(small_synth("C", {2}, 40));
  const auto r = run_years_experiment({{"A", 2019, &a}, {"B", 2020, &b}}, {},
                                      {{"C", 2021, &tc}, {"B", 2020, &tb}, {"A", 2019, &ta}}, small_config());
  ASSERT_EQ(r.auroc.size(), 2u);
  EXPECT_EQ(r.auroc[0].size(), 3u);
  EXPECT_EQ(r.test_names, (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(r.in_dataset, (std::vector<int>{0, 1}));
  const auto csv = years_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '*'), 2);
  const auto svg = years_svg(r);
  std::size_t circles = 0;
  for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  EXPECT_EQ(circles, 2u);
  EXPECT_THROW(run_years_experiment({{"A", 2019, &a}}, {}, {{"A", 2019, &ta}}, small_config()), ConfigError);
}

TEST(Emit, DisplayRoundsButJsonKeepsPrecision) {
  EXPECT_EQ(display_pct(0.96549), "96.5");
  EXPECT_EQ(display_pct(0.9), "90.0");
  EXPECT_EQ(display_pct(1.0), "100.0");
  BenchmarkResult b;
  EvalReport r;
  r.dataset = "x,y";
  r.auroc = 0.123456789012345;
  b.reports.push_back(r);
  b.mean_auroc = r.auroc;
  const auto j = to_json(b);
  EXPECT_EQ(Json::parse(j.dump())["reports"][0]["auroc"].get<double>(), r.auroc);
  const auto csv = benchmark_csv(b);
  EXPECT_NE(csv.find("\"x,y\",0,0,12.3"), std::string::npos);
  EXPECT_NE(csv.find("mean,,,12.3"), std::string::npos);
  EXPECT_THROW(render_report(Json::object()), ConfigError);
}

}  // namespace
}  // namespace lntune

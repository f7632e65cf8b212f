#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lntune/data/frame_store.hpp"
#include "lntune/data/manifest.hpp"
#include "lntune/evaluator/scoring.hpp"
#include "lntune/trainer/checkpoint.hpp"

namespace lntune {

using data::Json;

struct EvalReport {
  std::string dataset;
  int n_real = 0;
  int n_fake = 0;
  double auroc = 0.0;
  std::vector<VideoScore> per_video;
  std::string model_fingerprint;
  std::string config_fingerprint;
  std::string preprocessing_fingerprint;
  int missing_frames = 0;
  int excluded_videos = 0;
  std::vector<std::string> warnings;
};

inline Json to_json(const VideoScore& v) {
  Json j;
  j["video_id"] = v.video_id;
  j["label"] = v.label;
  j["video_prob"] = v.video_prob;
  j["frame_probs"] = v.frame_probs;
  return j;
}

inline Json to_json(const EvalReport& r) {
  Json j;
  j["kind"] = "eval_report";
  j["dataset"] = r.dataset;
  j["n_real"] = r.n_real;
  j["n_fake"] = r.n_fake;
  j["auroc"] = r.auroc;
  j["model_fingerprint"] = r.model_fingerprint;
  j["config_fingerprint"] = r.config_fingerprint;
  j["preprocessing_fingerprint"] = r.preprocessing_fingerprint;
  j["missing_frames"] = r.missing_frames;
  j["excluded_videos"] = r.excluded_videos;
  j["warnings"] = r.warnings;
  Json videos = Json::array();
  for (const auto& v : r.per_video) videos.push_back(to_json(v));
  j["per_video"] = videos;
  return j;
}

inline EvalReport report_from_json(const Json& j) {
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.n_real = j.at("n_real").get<int>();
  r.n_fake = j.at("n_fake").get<int>();
  r.auroc = j.at("auroc").get<double>();
  r.model_fingerprint = j.value("model_fingerprint", std::string());
  r.config_fingerprint = j.value("config_fingerprint", std::string());
  r.preprocessing_fingerprint = j.value("preprocessing_fingerprint", std::string());
  r.missing_frames = j.value("missing_frames", 0);
  r.excluded_videos = j.value("excluded_videos", 0);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  for (const auto& v : j.at("per_video")) {
    VideoScore s;
    s.video_id = v.at("video_id").get<std::string>();
    s.label = v.at("label").get<int>();
    s.video_prob = v.at("video_prob").get<double>();
    s.frame_probs = v.at("frame_probs").get<std::vector<double>>();
    r.per_video.push_back(std::move(s));
  }
  return r;
}

/// Scores one frame store into a report.
inline EvalReport evaluate_store(const FloatModel& model, const data::FrameStore& store, int batch = 256) {
  EvalReport r;
  r.dataset = store.name;
  r.per_video = score_videos(model, store, batch);
  for (const auto& v : r.per_video) (v.label == 1 ? r.n_fake : r.n_real) += 1;
  r.auroc = video_auroc(r.per_video);
  r.model_fingerprint = model_fingerprint(model);
  r.missing_frames = store.missing_frames;
  r.excluded_videos = store.excluded_videos;
  return r;
}

struct BenchmarkOptions {
  /// Preprocessing fingerprint the model was trained on; empty skips the check.
  std::string expected_preprocessing;
  /// Raise FingerprintMismatch instead of recording a warning.
  bool hard_fail = true;
  /// Drop unreadable frames (tallied in the report) instead of failing.
  bool skip_missing = true;
  int batch = 256;
  std::string config_fingerprint;
};

struct BenchmarkResult {
  std::vector<EvalReport> reports;
  double mean_auroc = 0.0;
};

inline Json to_json(const BenchmarkResult& b) {
  Json j;
  j["kind"] = "benchmark";
  Json rows = Json::array();
  for (const auto& r : b.reports) rows.push_back(to_json(r));
  j["reports"] = rows;
  j["mean_auroc"] = b.mean_auroc;
  return j;
}

inline BenchmarkResult benchmark_from_json(const Json& j) {
  BenchmarkResult b;
  for (const auto& r : j.at("reports")) b.reports.push_back(report_from_json(r));
  b.mean_auroc = j.at("mean_auroc").get<double>();
  return b;
}

inline double mean_auroc(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : reports) s += r.auroc;
  return s / static_cast<double>(reports.size());
}

/// Evaluates a model on each manifest, plus the mean over datasets.
inline BenchmarkResult run_benchmark(const FloatModel& model, const std::vector<data::DatasetManifest>& manifests,
                                     const BenchmarkOptions& opt = {}) {
  BenchmarkResult out;
  for (const auto& m : manifests) {
    std::string warning;
    if (!opt.expected_preprocessing.empty() && m.preprocessing_fingerprint != opt.expected_preprocessing) {
      warning = "preprocessing fingerprint of " + m.name + " (" + m.preprocessing_fingerprint +
                ") differs from the training data (" + opt.expected_preprocessing + ")";
      if (opt.hard_fail) throw FingerprintMismatch(warning);
      std::cerr << "warning: " << warning << "\n";
    }
    auto report = evaluate_store(model, data::FrameStore::load(m, opt.skip_missing), opt.batch);
    report.dataset = m.name;
    report.config_fingerprint = opt.config_fingerprint;
    report.preprocessing_fingerprint = m.preprocessing_fingerprint;
    if (!warning.empty()) report.warnings.push_back(warning);
    out.reports.push_back(std::move(report));
  }
  out.mean_auroc = mean_auroc(out.reports);
  return out;
}

}  // namespace lntune

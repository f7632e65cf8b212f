#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lntune/clock.hpp"
#include "lntune/data/manifest.hpp"
#include "lntune/data/preprocess.hpp"

namespace lntune::data {

/// Raw dataset layout read by ingest_directory:
///   <root>/real/<video>      video file or directory of frame images
///   <root>/fake/<video>
///   <root>/sources.json      optional {"<fake id>": "<real id>"}
/// Video ids are the entry names without extension. Fakes without a
/// sources.json entry get source "unknown".
struct IngestOptions {
  std::string name = "dataset";
  std::string dataset;
  Split split = Split::Test;
  int year = 0;
};

struct IngestSummary {
  int videos = 0;
  int sampled_frames = 0;
  int skipped_frames = 0;
  std::vector<std::string> excluded;
};

inline std::vector<std::filesystem::path> list_videos(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().filename().string().starts_with(".")) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Preprocesses every video under `root` into `out_dir/<id>/` and returns the
/// manifest (frame paths relative to out_dir). Videos without any detected
/// face are excluded and listed in the summary.
inline DatasetManifest ingest_directory(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                                        const PreprocessConfig& cfg, const FaceDetector& detector,
                                        const IngestOptions& opt, IngestSummary* summary = nullptr) {
  if (!std::filesystem::is_directory(root / "real") && !std::filesystem::is_directory(root / "fake"))
    throw IoError("input directory " + root.string() + " has neither real/ nor fake/");
  std::map<std::string, std::string> sources;
  if (std::filesystem::exists(root / "sources.json")) {
    try {
      std::ifstream in(root / "sources.json");
      sources = Json::parse(in).get<std::map<std::string, std::string>>();
    } catch (const std::exception& e) {
      throw ManifestError("sources.json: " + std::string(e.what()));
    }
  }
  IngestSummary local;
  auto& sum = summary ? *summary : local;
  DatasetManifest m;
  m.name = opt.name;
  m.preprocessing_fingerprint = cfg.fingerprint();
  m.created_at = timestamp_utc();
  m.root = out_dir;
  for (const auto label : {Label::Real, Label::Fake}) {
    for (const auto& path : list_videos(root / to_string(label))) {
      const std::string id = path.stem().string();
      auto source = open_frame_source(path);
      VideoRecord r;
      r.video_id = id;
      r.label = label;
      r.source_id = label == Label::Real ? id : (sources.count(id) ? sources[id] : kUnknownSource);
      r.generator = label == Label::Real ? "real" : kUnknownSource;
      r.split = opt.split;
      r.dataset = opt.dataset.empty() ? opt.name : opt.dataset;
      r.year = opt.year;
      try {
        const auto res = preprocess_video(*source, cfg, detector, out_dir / id);
        sum.sampled_frames += res.sampled;
        sum.skipped_frames += res.skipped;
        for (const auto& c : res.crops) r.frame_paths.push_back(std::filesystem::relative(c, out_dir).generic_string());
      } catch (const NoFaceFound&) {
        sum.excluded.push_back(id);
        continue;
      }
      ++sum.videos;
      m.records.push_back(std::move(r));
    }
  }
  // a fake whose listed source was excluded or never existed falls back to unknown
  std::set<std::string> reals;
  for (const auto& r : m.records)
    if (r.label == Label::Real) reals.insert(r.video_id);
  for (auto& r : m.records)
    if (r.label == Label::Fake && !reals.count(r.source_id)) r.source_id = kUnknownSource;
  validate(m, true);
  return m;
}

}  // namespace lntune::data

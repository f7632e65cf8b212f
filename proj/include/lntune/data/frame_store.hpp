#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lntune/data/image.hpp"
#include "lntune/data/manifest.hpp"

namespace lntune::data {

/// Decoded frames of a manifest held in memory, with per-frame video links.
struct FrameStore {
  std::string name;
  std::vector<Image> frames;
  std::vector<int> frame_video;
  std::vector<std::string> video_ids;
  std::vector<int> video_labels;
  /// Frames that could not be read and videos left with none.
  int missing_frames = 0;
  int excluded_videos = 0;

  std::size_t size() const { return frames.size(); }
  int frame_label(std::size_t i) const { return video_labels[static_cast<std::size_t>(frame_video[i])]; }

  /// With skip_missing, unreadable frames are dropped and tallied; otherwise
  /// they raise IoError.
  static FrameStore load(const DatasetManifest& m, bool skip_missing = false) {
    FrameStore s;
    s.name = m.name;
    for (const auto& r : m.records) {
      std::vector<Image> got;
      for (const auto& f : r.frame_paths) {
        const auto path = m.resolve(f);
        if (skip_missing && !std::filesystem::exists(path)) {
          ++s.missing_frames;
          continue;
        }
        try {
          got.push_back(read_rgb(path));
        } catch (const IoError&) {
          if (!skip_missing) throw;
          ++s.missing_frames;
        }
      }
      if (got.empty()) {
        ++s.excluded_videos;
        continue;
      }
      const int v = static_cast<int>(s.video_ids.size());
      s.video_ids.push_back(r.video_id);
      s.video_labels.push_back(r.label_index());
      for (auto& img : got) {
        s.frames.push_back(std::move(img));
        s.frame_video.push_back(v);
      }
    }
    return s;
  }

  /// Videos of `m` (matched by id) taken from this store, in m's order.
  FrameStore subset(const DatasetManifest& m) const {
    std::map<std::string, int> index;
    for (std::size_t v = 0; v < video_ids.size(); ++v) index[video_ids[v]] = static_cast<int>(v);
    std::vector<std::vector<std::size_t>> frames_of(video_ids.size());
    for (std::size_t i = 0; i < frames.size(); ++i) frames_of[static_cast<std::size_t>(frame_video[i])].push_back(i);
    FrameStore s;
    s.name = m.name;
    for (const auto& r : m.records) {
      const auto it = index.find(r.video_id);
      if (it == index.end()) throw ManifestError("subset: video " + r.video_id + " is not in store " + name);
      const int v = static_cast<int>(s.video_ids.size());
      s.video_ids.push_back(r.video_id);
      s.video_labels.push_back(video_labels[static_cast<std::size_t>(it->second)]);
      for (std::size_t i : frames_of[static_cast<std::size_t>(it->second)]) {
        s.frames.push_back(frames[i]);
        s.frame_video.push_back(v);
      }
    }
    return s;
  }

  /// Model inputs for every frame, computed once per encoder input format.
  const Mat<float>& inputs(const EncoderSpec& spec) const {
    const std::string key = to_string(spec.backbone) + "/" + std::to_string(spec.image_size);
    auto it = cache_->find(key);
    if (it == cache_->end()) it = cache_->emplace(key, to_model_input<float>(frames, spec)).first;
    return it->second;
  }

 private:
  std::shared_ptr<std::map<std::string, Mat<float>>> cache_ = std::make_shared<std::map<std::string, Mat<float>>>();
};

}  // namespace lntune::data

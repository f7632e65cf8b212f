#pragma once

#include <string>
#include <vector>

#include "lntune/data/frame_store.hpp"
#include "lntune/encoder.hpp"
#include "lntune/metrics.hpp"

namespace lntune {

struct VideoScore {
  std::string video_id;
  int label = 0;
  std::vector<double> frame_probs;
  double video_prob = 0.0;
};

/// Fake-class probability of every frame, in store order.
inline std::vector<double> score_frames(const FloatModel& model, const data::FrameStore& store, int batch = 256) {
  const auto& x = store.inputs(model.spec());
  std::vector<double> probs;
  probs.reserve(store.size());
  for (Eigen::Index r = 0; r < x.rows(); r += batch) {
    const Eigen::Index n = std::min<Eigen::Index>(batch, x.rows() - r);
    const auto out = forward(model, Mat<float>(x.middleRows(r, n)));
    const auto p = fake_probabilities(out.logits);
    probs.insert(probs.end(), p.begin(), p.end());
  }
  return probs;
}

/// Groups per-frame probabilities (store order) into video scores.
inline std::vector<VideoScore> collect_videos(const data::FrameStore& store, const std::vector<double>& probs) {
  if (probs.size() != store.size()) throw ShapeMismatch("collect_videos: one probability per frame expected");
  std::vector<VideoScore> out(store.video_ids.size());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v].video_id = store.video_ids[v];
    out[v].label = store.video_labels[v];
  }
  for (std::size_t i = 0; i < probs.size(); ++i)
    out[static_cast<std::size_t>(store.frame_video[i])].frame_probs.push_back(probs[i]);
  for (auto& v : out) v.video_prob = aggregate_video(v.frame_probs);
  return out;
}

inline std::vector<VideoScore> score_videos(const FloatModel& model, const data::FrameStore& store, int batch = 256) {
  return collect_videos(store, score_frames(model, store, batch));
}

inline double video_auroc(const std::vector<VideoScore>& videos) {
  std::vector<ScoredLabel> s;
  s.reserve(videos.size());
  for (const auto& v : videos) s.push_back({v.video_prob, v.label});
  return auroc(s);
}

}  // namespace lntune

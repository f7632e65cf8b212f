#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "lntune/errors.hpp"

namespace lntune {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;  // 1 = fake (positive), 0 = real
};

/// Video score: arithmetic mean of per-frame fake probabilities.
inline double aggregate_video(std::span<const double> frame_probs) {
  if (frame_probs.empty()) throw EmptyVideo("aggregate_video: no frames");
  double s = 0.0;
  for (double p : frame_probs) s += p;
  return s / static_cast<double>(frame_probs.size());
}

/// Area under the ROC curve via the Mann-Whitney rank statistic with
/// midranks, i.e. P(score_fake > score_real) + 0.5 P(tie).
inline double auroc(std::span<const ScoredLabel> items) {
  const std::size_t n = items.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return items[a].score < items[b].score; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && items[order[j]].score == items[order[i]].score) ++j;
    // ranks i+1 .. j share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (items[order[k]].label == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw SingleClass("auroc: both classes are required");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeMismatch("auroc: scores/labels size mismatch");
  std::vector<ScoredLabel> items(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) items[i] = {scores[i], labels[i]};
  return auroc(items);
}

}  // namespace lntune

#pragma once

#include <cmath>
#include <vector>

#include "lntune/vit.hpp"

namespace lntune {

/// Adam over the trainable parameters of a model. Frozen parameters are
/// never read or written, so they stay bitwise unchanged.
struct AdamState {
  std::vector<Mat<float>> m;
  std::vector<Mat<float>> v;
  std::int64_t t = 0;

  void init(const Model<float>& model) {
    m.clear();
    v.clear();
    for (const auto& p : model.params()) {
      const bool on = p.info.trainable;
      m.push_back(on ? Mat<float>::Zero(p.info.rows, p.info.cols) : Mat<float>());
      v.push_back(on ? Mat<float>::Zero(p.info.rows, p.info.cols) : Mat<float>());
    }
    t = 0;
  }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

inline void adam_step(Model<float>& model, AdamState& state, double lr, const AdamHyper& h) {
  if (state.m.size() != model.params().size()) state.init(model);
  ++state.t;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  const float b1 = static_cast<float>(h.beta1), b2 = static_cast<float>(h.beta2);
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(h.eps), wd = static_cast<float>(h.weight_decay);
  auto& params = model.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.info.trainable) continue;
    auto g = p.grad.array();
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    if (wd > 0) g += wd * p.value.array();
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.square();
    p.value.array() -= step * m / ((v * inv_c2).sqrt() + eps);
  }
  model.mark_dirty();
}

}  // namespace lntune

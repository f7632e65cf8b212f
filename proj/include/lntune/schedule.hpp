#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "lntune/errors.hpp"

namespace lntune {

/// Position of the optimizer in the cyclic schedule. Each cycle is a linear
/// warmup followed by a cosine decay; both are indexed by step, not epoch.
struct ScheduleState {
  std::int64_t step = 0;
  std::int64_t steps_per_epoch = 1;
  int warmup_epochs = 1;
  int decay_epochs = 9;

  int cycle_length_epochs() const { return warmup_epochs + decay_epochs; }
  std::int64_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  std::int64_t decay_steps() const { return decay_epochs * steps_per_epoch; }
  std::int64_t cycle_steps() const { return cycle_length_epochs() * steps_per_epoch; }
  std::int64_t cycle_index() const { return step / cycle_steps(); }
};

inline double lr_at(const ScheduleState& s, double lr_min, double lr_max) {
  if (s.steps_per_epoch < 1 || s.warmup_epochs < 1 || s.decay_epochs < 1 || s.step < 0)
    throw ConfigError("lr_at: invalid schedule state");
  const std::int64_t p = s.step % s.cycle_steps();
  const std::int64_t w = s.warmup_steps();
  if (p < w) return lr_min + (lr_max - lr_min) * static_cast<double>(p) / static_cast<double>(w);
  const double q = static_cast<double>(p - w) / static_cast<double>(s.decay_steps());
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * q));
}

}  // namespace lntune

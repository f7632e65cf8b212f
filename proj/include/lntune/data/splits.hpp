#pragma once

#include <set>
#include <string>
#include <vector>

#include "lntune/data/manifest.hpp"
#include "lntune/rng.hpp"

namespace lntune::data {

namespace detail {

/// Real video ids split into two halves by a seeded shuffle.
inline std::pair<std::set<std::string>, std::set<std::string>> real_halves(const DatasetManifest& m,
                                                                           std::uint64_t trial_seed) {
  std::set<std::string> reals;
  for (const auto& r : m.records) {
    if (r.label == Label::Real) reals.insert(r.video_id);
  }
  for (const auto& r : m.records) {
    if (r.label == Label::Fake && !reals.count(r.source_id))
      throw MissingSourceLinks(r.video_id + ": source '" + r.source_id + "' is not a real video in the manifest");
  }
  std::vector<std::string> order(reals.begin(), reals.end());
  Rng rng(derive_seed(trial_seed, "pairing"));
  rng.shuffle(order);
  const std::size_t half = order.size() / 2;
  return {std::set<std::string>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half)),
          std::set<std::string>(order.begin() + static_cast<std::ptrdiff_t>(half), order.end())};
}

inline DatasetManifest select(const DatasetManifest& m, const std::set<std::string>& reals,
                              const std::set<std::string>& fake_sources, const std::string& suffix) {
  DatasetManifest out = m;
  out.name = m.name + suffix;
  out.records.clear();
  for (const auto& r : m.records) {
    if ((r.label == Label::Real && reals.count(r.video_id)) ||
        (r.label == Label::Fake && fake_sources.count(r.source_id)))
      out.records.push_back(r);
  }
  return out;
}

}  // namespace detail

/// Reals of the first half plus the fakes generated from them.
inline DatasetManifest build_paired_split(const DatasetManifest& m, std::uint64_t trial_seed) {
  const auto [a, b] = detail::real_halves(m, trial_seed);
  return detail::select(m, a, a, "/paired-" + std::to_string(trial_seed));
}

/// Reals of the first half plus the fakes generated from the second half.
inline DatasetManifest build_unpaired_split(const DatasetManifest& m, std::uint64_t trial_seed) {
  const auto [a, b] = detail::real_halves(m, trial_seed);
  return detail::select(m, a, b, "/unpaired-" + std::to_string(trial_seed));
}

}  // namespace lntune::data

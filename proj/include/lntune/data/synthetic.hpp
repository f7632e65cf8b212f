#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "lntune/data/image.hpp"
#include "lntune/data/manifest.hpp"
#include "lntune/data/preprocess.hpp"
#include "lntune/rng.hpp"

namespace lntune::data {

/// Procedural stand-in for a face-forgery dataset. Every identity has one
/// real video; each listed generator produces one fake from it by adding a
/// low-amplitude, high-frequency artifact inside a soft face region. The
/// identity appearance is a low-frequency pattern scaled by
/// confound_amplitude, so identity is easy to see and the artifact is not.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::string dataset = "synthetic";
  /// Seeds the identities and generator patterns; keep it fixed across the
  /// train/val/test sets of one suite.
  std::uint64_t world_seed = 0;
  int identities = 40;
  /// First identity index; use disjoint ranges for disjoint identity sets.
  int identity_offset = 0;
  /// Generator indices; empty means 0..num_generators-1.
  std::vector<int> generators;
  int num_generators = 3;
  int frames_per_video = 8;
  int image_size = 32;
  double artifact_amplitude = 0.06;
  double confound_amplitude = 0.25;
  double noise = 0.02;
  Split split = Split::Train;
  int year = 0;

  std::vector<int> generator_ids() const {
    if (!generators.empty()) return generators;
    std::vector<int> g;
    for (int i = 0; i < num_generators; ++i) g.push_back(i);
    return g;
  }

  void validate() const {
    if (identities < 1 || frames_per_video < 1 || image_size < 4) throw ConfigError("synthetic: sizes too small");
    if (generator_ids().empty()) throw ConfigError("synthetic: at least one generator required");
    for (int g : generator_ids())
      if (g < 0) throw ConfigError("synthetic: generator ids must be nonnegative");
    if (!(artifact_amplitude >= 0) || !(confound_amplitude >= 0) || !(noise >= 0))
      throw ConfigError("synthetic: amplitudes must be nonnegative");
  }

  Json to_json() const {
    Json j;
    j["name"] = name;
    j["dataset"] = dataset;
    j["world_seed"] = world_seed;
    j["identities"] = identities;
    j["identity_offset"] = identity_offset;
    j["generators"] = generator_ids();
    j["frames_per_video"] = frames_per_video;
    j["image_size"] = image_size;
    j["artifact_amplitude"] = artifact_amplitude;
    j["confound_amplitude"] = confound_amplitude;
    j["noise"] = noise;
    j["split"] = to_string(split);
    j["year"] = year;
    return j;
  }

  static SyntheticSpec from_json(const Json& j) {
    SyntheticSpec s;
    s.name = j.value("name", s.name);
    s.dataset = j.value("dataset", s.name);
    s.world_seed = j.value("world_seed", s.world_seed);
    s.identities = j.value("identities", s.identities);
    s.identity_offset = j.value("identity_offset", s.identity_offset);
    if (j.contains("generators")) {
      if (j["generators"].is_number_integer())
        s.num_generators = j["generators"].get<int>();
      else
        s.generators = j["generators"].get<std::vector<int>>();
    }
    s.frames_per_video = j.value("frames_per_video", s.frames_per_video);
    s.image_size = j.value("image_size", s.image_size);
    s.artifact_amplitude = j.value("artifact_amplitude", s.artifact_amplitude);
    s.confound_amplitude = j.value("confound_amplitude", s.confound_amplitude);
    s.noise = j.value("noise", s.noise);
    s.split = parse_split(j.value("split", std::string("train")));
    s.year = j.value("year", s.year);
    s.validate();
    return s;
  }

  /// Crops are rendered directly, so the fingerprint describes a detector-free
  /// pipeline at this crop size and frame count.
  PreprocessConfig preprocess_equivalent() const {
    PreprocessConfig c;
    c.frames_per_video = frames_per_video;
    c.bbox_margin = 1.0;
    c.crop_size = image_size;
    c.detector = "synthetic";
    c.alignment = false;
    return c;
  }
};

namespace detail {

struct Wave {
  double fx, fy, phase;
  std::array<double, 3> color;
};

inline std::vector<Wave> identity_waves(std::uint64_t world_seed, int identity) {
  Rng rng(derive_seed(world_seed, "synthetic-identity", static_cast<std::uint64_t>(identity)));
  std::vector<Wave> waves(4);
  for (auto& w : waves) {
    w.fx = rng.uniform(-2.0, 2.0);
    w.fy = rng.uniform(-2.0, 2.0);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& c : w.color) c = rng.uniform(-1.0, 1.0);
  }
  return waves;
}

/// Generator artifact: gratings with 0.25..0.5 cycles/pixel at
/// generator-specific orientations and colours; phase is drawn per frame.
inline std::vector<Wave> generator_waves(std::uint64_t world_seed, int generator) {
  Rng rng(derive_seed(world_seed, "synthetic-generator", static_cast<std::uint64_t>(generator)));
  std::vector<Wave> waves(3);
  for (auto& w : waves) {
    const double r = rng.uniform(0.25, 0.5);
    const double a = rng.uniform(0.0, std::numbers::pi);
    w.fx = r * std::cos(a);
    w.fy = r * std::sin(a);
    w.phase = 0.0;
    const double lum = rng.uniform(0.6, 1.0);
    for (auto& c : w.color) c = lum + rng.uniform(-0.3, 0.3);
  }
  return waves;
}

}  // namespace detail

/// Renders frame `frame` of `identity`; generator < 0 renders the real frame.
/// A fake frame equals its real frame plus the generator artifact.
inline Image render_synthetic_frame(const SyntheticSpec& spec, int identity, int generator, int frame) {
  const int S = spec.image_size;
  const double pi2 = 2.0 * std::numbers::pi;
  const auto waves = detail::identity_waves(spec.world_seed, identity);
  Rng frame_rng(derive_seed(spec.world_seed, "synthetic-frame",
                            static_cast<std::uint64_t>(identity) * 100003ULL + static_cast<std::uint64_t>(frame)));
  const double dx = frame_rng.uniform(-1.5, 1.5), dy = frame_rng.uniform(-1.5, 1.5);
  const double gain = frame_rng.uniform(-0.05, 0.05);
  std::vector<double> noise(static_cast<std::size_t>(S * S * 3));
  for (auto& n : noise) n = frame_rng.normal() * spec.noise;

  std::vector<detail::Wave> art;
  if (generator >= 0) {
    art = detail::generator_waves(spec.world_seed, generator);
    Rng phase_rng(derive_seed(spec.world_seed, "synthetic-artifact-phase",
                              (static_cast<std::uint64_t>(identity) * 1009ULL + static_cast<std::uint64_t>(generator)) *
                                      100003ULL +
                                  static_cast<std::uint64_t>(frame)));
    for (auto& w : art) w.phase = phase_rng.uniform(0.0, pi2);
  }

  Image img(S, S, CV_8UC3);
  const double c = (S - 1) / 2.0;
  for (int y = 0; y < S; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < S; ++x) {
      const double u = (x + dx) / S, v = (y + dy) / S;
      // generic face: bright ellipse on a darker background
      const double ex = (x + dx - c) / (0.32 * S), ey = (y + dy - c) / (0.42 * S);
      const double face = 1.0 / (1.0 + std::exp(8.0 * (std::sqrt(ex * ex + ey * ey) - 1.0)));
      std::array<double, 3> px{0.30 + 0.40 * face, 0.28 + 0.30 * face, 0.30 + 0.22 * face};
      for (const auto& w : waves) {
        const double s = std::cos(pi2 * (w.fx * u + w.fy * v) + w.phase);
        for (int ch = 0; ch < 3; ++ch) px[static_cast<std::size_t>(ch)] += spec.confound_amplitude * 0.5 * w.color[static_cast<std::size_t>(ch)] * s;
      }
      if (!art.empty()) {
        for (const auto& w : art) {
          const double s = std::cos(pi2 * (w.fx * x + w.fy * y) + w.phase);
          for (int ch = 0; ch < 3; ++ch)
            px[static_cast<std::size_t>(ch)] += spec.artifact_amplitude * face * w.color[static_cast<std::size_t>(ch)] * s / std::sqrt(3.0);
        }
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double val = px[static_cast<std::size_t>(ch)] + gain + noise[static_cast<std::size_t>((y * S + x) * 3 + ch)];
        row[x][ch] = static_cast<unsigned char>(std::clamp(std::lround(val * 255.0), 0L, 255L));
      }
    }
  }
  return img;
}

inline std::string synthetic_real_id(const SyntheticSpec& spec, int identity) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-id%04d-real", spec.dataset.c_str(), identity);
  return buf;
}

inline std::string synthetic_fake_id(const SyntheticSpec& spec, int identity, int generator) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-id%04d-g%02d", spec.dataset.c_str(), identity, generator);
  return buf;
}

/// Renders the dataset into out_dir (one folder of PNG crops per video) and
/// returns its manifest; frame paths are relative to out_dir.
inline DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  DatasetManifest m;
  m.name = spec.name;
  m.preprocessing_fingerprint = spec.preprocess_equivalent().fingerprint();
  m.created_at = timestamp_utc();
  m.root = out_dir;
  auto emit = [&](const std::string& id, int identity, int generator) {
    VideoRecord r;
    r.video_id = id;
    r.label = generator < 0 ? Label::Real : Label::Fake;
    r.source_id = synthetic_real_id(spec, identity);
    r.generator = generator < 0 ? "real" : "gen" + std::to_string(generator);
    r.split = spec.split;
    r.dataset = spec.dataset;
    r.year = spec.year;
    for (int f = 0; f < spec.frames_per_video; ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04d.png", f);
      const std::string rel = id + "/" + name;
      write_png(out_dir / rel, render_synthetic_frame(spec, identity, generator, f));
      r.frame_paths.push_back(rel);
    }
    m.records.push_back(std::move(r));
  };
  for (int i = 0; i < spec.identities; ++i) {
    const int identity = spec.identity_offset + i;
    emit(synthetic_real_id(spec, identity), identity, -1);
    for (int g : spec.generator_ids()) emit(synthetic_fake_id(spec, identity, g), identity, g);
  }
  validate(m, true);
  return m;
}

}  // namespace lntune::data

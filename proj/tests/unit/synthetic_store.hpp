#pragma once

#include "lntune/data/frame_store.hpp"
#include "lntune/data/synthetic.hpp"

namespace lntune::testing {

/// In-memory frame store of a synthetic spec: per identity one real video
/// and one fake per generator.
inline data::FrameStore synthetic_store(const data::SyntheticSpec& sp) {
  data::FrameStore s;
  s.name = sp.name;
  for (int i = sp.identity_offset; i < sp.identity_offset + sp.identities; ++i) {
    std::vector<int> gens{-1};
    for (int g : sp.generator_ids()) gens.push_back(g);
    for (int g : gens) {
      const int v = static_cast<int>(s.video_ids.size());
      s.video_ids.push_back(g < 0 ? data::synthetic_real_id(sp, i) : data::synthetic_fake_id(sp, i, g));
      s.video_labels.push_back(g < 0 ? 0 : 1);
      for (int f = 0; f < sp.frames_per_video; ++f) {
        s.frames.push_back(data::render_synthetic_frame(sp, i, g, f));
        s.frame_video.push_back(v);
      }
    }
  }
  return s;
}

}  // namespace lntune::testing

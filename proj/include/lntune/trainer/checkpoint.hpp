#pragma once

#include <cstring>
#include <filesystem>
#include <optional>
#include <string>

#include "lntune/encoder.hpp"
#include "lntune/hash.hpp"
#include "lntune/trainer/adam.hpp"
#include "lntune/trainer/config.hpp"

namespace lntune {

// File layout: "LNTCKPT1" | u64 metadata length | metadata JSON |
// parameter values in layout order (f32) | Adam moments of trainable
// parameters (f32, when present) | 64-char SHA-256 hex of all prior bytes.
inline constexpr char kCheckpointMagic[] = "LNTCKPT1";

struct Checkpoint {
  FloatModel model;
  /// Resolved TrainConfig, training step, best-validation bookkeeping.
  Json meta;
  std::optional<AdamState> adam;
};

namespace detail {

inline void put_floats(std::string& out, const Mat<float>& m) {
  out.append(reinterpret_cast<const char*>(m.data()), sizeof(float) * static_cast<std::size_t>(m.size()));
}

inline void get_floats(const std::string& in, std::size_t& pos, Mat<float>& m) {
  const std::size_t n = sizeof(float) * static_cast<std::size_t>(m.size());
  if (pos + n > in.size()) throw CorruptCheckpoint("checkpoint truncated");
  std::memcpy(m.data(), in.data() + pos, n);
  pos += n;
}

inline Json model_meta(const FloatModel& model) {
  Json j;
  j["encoder"] = to_json(model.spec());
  j["policy"] = to_json(model.policy());
  j["l2_normalize"] = model.l2_normalize;
  j["precision"] = to_string(model.precision);
  j["init_seed"] = model.seed();
  Json names = Json::array();
  for (const auto& p : model.params()) names.push_back({p.info.name, p.info.rows, p.info.cols});
  j["parameters"] = names;
  return j;
}

}  // namespace detail

/// Hash of the parameter values and architecture; identifies a model in
/// reports independently of optimizer state and file layout.
inline std::string model_fingerprint(const FloatModel& model) {
  std::string bytes = detail::model_meta(model).dump();
  for (const auto& p : model.params()) detail::put_floats(bytes, p.value);
  return sha256_hex(bytes);
}

inline std::string encode_checkpoint(const FloatModel& model, const Json& meta, const AdamState* adam) {
  Json doc;
  doc["format"] = "lntune-checkpoint";
  doc["version"] = 1;
  doc["model"] = detail::model_meta(model);
  doc["meta"] = meta;
  doc["has_optimizer"] = adam != nullptr;
  if (adam) doc["adam_t"] = adam->t;
  const std::string header = doc.dump();
  std::string out(kCheckpointMagic, 8);
  const std::uint64_t len = header.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += header;
  for (const auto& p : model.params()) detail::put_floats(out, p.value);
  if (adam) {
    for (std::size_t k = 0; k < model.params().size(); ++k) {
      if (!model.params()[k].info.trainable) continue;
      detail::put_floats(out, adam->m[k]);
      detail::put_floats(out, adam->v[k]);
    }
  }
  out += sha256_hex(out);
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const FloatModel& model, const Json& meta = Json::object(),
                            const AdamState* adam = nullptr) {
  write_file_bytes(path, encode_checkpoint(model, meta, adam));
}

/// Decodes a checkpoint; with `expected` set, a different encoder spec is
/// treated as corruption.
inline Checkpoint decode_checkpoint(const std::string& bytes, const EncoderSpec* expected = nullptr) {
  if (bytes.size() < 8 + 8 + 64 || bytes.compare(0, 8, kCheckpointMagic) != 0)
    throw CorruptCheckpoint("not a checkpoint file");
  const std::string body = bytes.substr(0, bytes.size() - 64);
  if (sha256_hex(body) != bytes.substr(bytes.size() - 64)) throw CorruptCheckpoint("checkpoint hash mismatch");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (16 + len > body.size()) throw CorruptCheckpoint("checkpoint header truncated");
  Json doc;
  EncoderSpec spec;
  ParamPolicy policy;
  try {
    doc = Json::parse(body.substr(16, len));
    spec = encoder_spec_from_json(doc.at("model").at("encoder"));
    policy = policy_from_json(doc.at("model").at("policy"));
  } catch (const std::exception& e) {
    throw CorruptCheckpoint(std::string("bad checkpoint header: ") + e.what());
  }
  if (expected && !(*expected == spec)) throw CorruptCheckpoint("checkpoint encoder spec differs from the requested one");
  const auto& mm = doc["model"];
  Checkpoint ck{FloatModel(spec, policy), doc.value("meta", Json::object()), std::nullopt};
  auto& model = ck.model;
  model.l2_normalize = mm.value("l2_normalize", true);
  model.precision = parse_precision(mm.value("precision", std::string("full")));
  model.set_seed(mm.value("init_seed", std::uint64_t{0}));
  const auto& names = mm.at("parameters");
  if (names.size() != model.params().size()) throw CorruptCheckpoint("checkpoint parameter list differs from layout");
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& p = model.params()[k];
    if (names[k][0].get<std::string>() != p.info.name || names[k][1].get<Eigen::Index>() != p.info.rows ||
        names[k][2].get<Eigen::Index>() != p.info.cols)
      throw CorruptCheckpoint("checkpoint parameter " + p.info.name + " does not match the layout");
  }
  std::size_t pos = 16 + len;
  for (auto& p : model.params()) detail::get_floats(body, pos, p.value);
  if (doc.value("has_optimizer", false)) {
    AdamState st;
    st.init(model);
    st.t = doc.value("adam_t", std::int64_t{0});
    for (std::size_t k = 0; k < model.params().size(); ++k) {
      if (!model.params()[k].info.trainable) continue;
      detail::get_floats(body, pos, st.m[k]);
      detail::get_floats(body, pos, st.v[k]);
    }
    ck.adam = std::move(st);
  }
  if (pos != body.size()) throw CorruptCheckpoint("checkpoint has trailing bytes");
  model.mark_dirty();
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const EncoderSpec* expected = nullptr) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return decode_checkpoint(read_file_bytes(path), expected);
}

}  // namespace lntune

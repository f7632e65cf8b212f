#pragma once

// Minimal reader/writer for the safetensors container: an 8-byte
// little-endian header length, a JSON header, then raw tensor bytes.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lntune/errors.hpp"

namespace lntune {

struct TensorEntry {
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

class SafetensorsFile {
 public:
  explicit SafetensorsFile(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("safetensors: cannot open " + path.string());
    unsigned char len_bytes[8];
    if (!in_.read(reinterpret_cast<char*>(len_bytes), 8)) throw IoError("safetensors: truncated header length");
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | len_bytes[i];
    if (len > (std::uint64_t{1} << 30)) throw IoError("safetensors: implausible header length");
    std::string header(len, '\0');
    if (!in_.read(header.data(), static_cast<std::streamsize>(len))) throw IoError("safetensors: truncated header");
    data_start_ = 8 + len;
    const auto j = nlohmann::json::parse(header);
    for (const auto& [name, v] : j.items()) {
      if (name == "__metadata__") continue;
      TensorEntry e;
      e.dtype = v.at("dtype").get<std::string>();
      e.shape = v.at("shape").get<std::vector<std::int64_t>>();
      e.begin = v.at("data_offsets").at(0).get<std::uint64_t>();
      e.end = v.at("data_offsets").at(1).get<std::uint64_t>();
      entries_[name] = e;
    }
  }

  const std::map<std::string, TensorEntry>& entries() const { return entries_; }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  /// Reads a tensor converted to float. Supports F32, F16 and BF16.
  std::vector<float> read_f32(const std::string& name) {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("safetensors: missing tensor " + name);
    const auto& e = it->second;
    const std::int64_t n = e.numel();
    const std::uint64_t bytes = e.end - e.begin;
    std::vector<char> raw(bytes);
    in_.seekg(static_cast<std::streamoff>(data_start_ + e.begin));
    if (!in_.read(raw.data(), static_cast<std::streamsize>(bytes))) throw IoError("safetensors: truncated data for " + name);
    std::vector<float> out(static_cast<std::size_t>(n));
    if (e.dtype == "F32") {
      if (bytes != static_cast<std::uint64_t>(n) * 4) throw IoError("safetensors: size mismatch for " + name);
      std::memcpy(out.data(), raw.data(), bytes);
    } else if (e.dtype == "BF16" || e.dtype == "F16") {
      if (bytes != static_cast<std::uint64_t>(n) * 2) throw IoError("safetensors: size mismatch for " + name);
      for (std::int64_t i = 0; i < n; ++i) {
        std::uint16_t h;
        std::memcpy(&h, raw.data() + 2 * i, 2);
        out[static_cast<std::size_t>(i)] = e.dtype == "BF16" ? bf16_to_float(h) : f16_to_float(h);
      }
    } else {
      throw IoError("safetensors: unsupported dtype " + e.dtype + " for " + name);
    }
    return out;
  }

  static float bf16_to_float(std::uint16_t h) {
    const std::uint32_t bits = static_cast<std::uint32_t>(h) << 16;
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  static float f16_to_float(std::uint16_t h) {
    const std::uint32_t sign = (h & 0x8000u) << 16;
    std::uint32_t exp = (h >> 10) & 0x1fu;
    std::uint32_t mant = h & 0x3ffu;
    std::uint32_t bits;
    if (exp == 0) {
      if (mant == 0) {
        bits = sign;
      } else {
        exp = 127 - 15 + 1;
        while ((mant & 0x400u) == 0) {
          mant <<= 1;
          --exp;
        }
        bits = sign | (exp << 23) | ((mant & 0x3ffu) << 13);
      }
    } else if (exp == 0x1f) {
      bits = sign | 0x7f800000u | (mant << 13);
    } else {
      bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t data_start_ = 0;
  std::map<std::string, TensorEntry> entries_;
};

struct NamedTensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

/// Writes F32 tensors in name order.
inline void write_safetensors(const std::filesystem::path& path, const std::map<std::string, NamedTensor>& tensors) {
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const std::uint64_t bytes = t.data.size() * 4;
    header[name] = {{"dtype", "F32"}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string h = header.dump();
  while (h.size() % 8 != 0) h.push_back(' ');
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("safetensors: cannot write " + path.string());
  std::uint64_t len = h.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xffu));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
}

}  // namespace lntune

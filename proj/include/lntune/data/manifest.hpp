#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lntune/clock.hpp"
#include "lntune/errors.hpp"
#include "lntune/hash.hpp"

namespace lntune::data {

using Json = nlohmann::ordered_json;

enum class Label { Real = 0, Fake = 1 };
enum class Split { Train, Val, Test };

inline std::string to_string(Label l) { return l == Label::Real ? "real" : "fake"; }
inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}
inline Label parse_label(const std::string& s) {
  if (s == "real") return Label::Real;
  if (s == "fake") return Label::Fake;
  throw ManifestError("unknown label '" + s + "'");
}
inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ManifestError("unknown split '" + s + "'");
}

/// source_id value for a fake whose real source is not known.
inline constexpr const char* kUnknownSource = "unknown";

struct VideoRecord {
  std::string video_id;
  Label label = Label::Real;
  std::string source_id;
  std::string generator = "real";
  std::vector<std::string> frame_paths;
  Split split = Split::Train;
  std::string dataset;
  int year = 0;

  int label_index() const { return static_cast<int>(label); }
  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct DatasetManifest {
  std::string name;
  std::string preprocessing_fingerprint;
  std::string created_at;
  std::string tool_version = kToolVersion;
  std::vector<VideoRecord> records;
  /// Directory relative frame paths resolve against; not serialized.
  std::filesystem::path root;

  std::filesystem::path resolve(const std::string& frame_path) const {
    const std::filesystem::path p(frame_path);
    return p.is_absolute() || root.empty() ? p : root / p;
  }

  std::size_t count(Label l) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const VideoRecord& r) { return r.label == l; }));
  }
  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.frame_paths.size();
    return n;
  }

  /// Records of one split, keeping the header.
  DatasetManifest subset(Split s) const {
    DatasetManifest out = *this;
    out.records.clear();
    for (const auto& r : records)
      if (r.split == s) out.records.push_back(r);
    return out;
  }

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.name == b.name && a.preprocessing_fingerprint == b.preprocessing_fingerprint &&
           a.created_at == b.created_at && a.tool_version == b.tool_version && a.records == b.records;
  }
};

inline Json to_json(const VideoRecord& r) {
  Json j;
  j["video_id"] = r.video_id;
  j["label"] = to_string(r.label);
  j["source_id"] = r.source_id;
  j["generator"] = r.generator;
  j["frame_paths"] = r.frame_paths;
  j["split"] = to_string(r.split);
  j["dataset"] = r.dataset;
  j["year"] = r.year;
  return j;
}

inline VideoRecord record_from_json(const Json& j) {
  try {
    VideoRecord r;
    r.video_id = j.at("video_id").get<std::string>();
    r.label = parse_label(j.at("label").get<std::string>());
    r.source_id = j.at("source_id").get<std::string>();
    r.generator = j.at("generator").get<std::string>();
    r.frame_paths = j.at("frame_paths").get<std::vector<std::string>>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.dataset = j.at("dataset").get<std::string>();
    r.year = j.at("year").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("malformed record: ") + e.what());
  }
}

/// Checks the structural invariants. File existence is checked only when
/// check_files is set.
inline void validate(const DatasetManifest& m, bool check_files = false) {
  std::set<std::string> ids;
  std::set<std::string> reals;
  for (const auto& r : m.records) {
    if (r.video_id.empty()) throw ManifestError("empty video_id");
    if (!ids.insert(r.video_id).second) throw ManifestError("duplicate video_id " + r.video_id);
    if (r.label == Label::Real) reals.insert(r.video_id);
    if (r.frame_paths.empty()) throw ManifestError(r.video_id + ": no frames");
  }
  for (const auto& r : m.records) {
    if (r.label == Label::Real && r.source_id != r.video_id)
      throw ManifestError(r.video_id + ": a real video must be its own source");
    if (r.label == Label::Fake && r.source_id != kUnknownSource && !reals.count(r.source_id))
      throw ManifestError(r.video_id + ": source " + r.source_id + " is not a real record");
    if (check_files)
      for (const auto& f : r.frame_paths)
        if (!std::filesystem::exists(m.resolve(f))) throw ManifestError(r.video_id + ": missing frame " + f);
  }
}

inline std::string serialize(const DatasetManifest& m) {
  Json header;
  header["name"] = m.name;
  header["preprocessing_fingerprint"] = m.preprocessing_fingerprint;
  header["created_at"] = m.created_at;
  header["tool_version"] = m.tool_version;
  std::string out = header.dump() + "\n";
  for (const auto& r : m.records) out += to_json(r).dump() + "\n";
  return out;
}

inline DatasetManifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  DatasetManifest m;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (header) {
      try {
        m.name = j.at("name").get<std::string>();
        m.preprocessing_fingerprint = j.at("preprocessing_fingerprint").get<std::string>();
        m.created_at = j.at("created_at").get<std::string>();
        m.tool_version = j.at("tool_version").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ManifestError(std::string("malformed header: ") + e.what());
      }
      header = false;
      continue;
    }
    m.records.push_back(record_from_json(j));
  }
  if (header) throw ManifestError("manifest has no header line");
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  validate(m);
  write_file_bytes(path, serialize(m));
}

inline DatasetManifest read_manifest(const std::filesystem::path& path, bool check_files = true) {
  if (!std::filesystem::exists(path)) throw ManifestError("manifest not found: " + path.string());
  DatasetManifest m = parse_manifest(read_file_bytes(path));
  m.root = path.parent_path();
  validate(m, check_files);
  return m;
}

}  // namespace lntune::data

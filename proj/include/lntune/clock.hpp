#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <string>

namespace lntune {

#ifndef LNTUNE_VERSION
#define LNTUNE_VERSION "0.0.0"
#endif

inline constexpr const char* kToolVersion = LNTUNE_VERSION;

/// SOURCE_DATE_EPOCH, when set, pins every timestamp the toolkit writes and
/// zeroes measured wall times so reruns produce identical files.
inline std::optional<std::int64_t> source_date_epoch() {
  const char* v = std::getenv("SOURCE_DATE_EPOCH");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const long long s = std::strtoll(v, &end, 10);
  if (end == v) return std::nullopt;
  return static_cast<std::int64_t>(s);
}

inline std::string timestamp_utc() {
  std::time_t t;
  if (auto pinned = source_date_epoch()) {
    t = static_cast<std::time_t>(*pinned);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (source_date_epoch()) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace lntune

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mbda {

// Error taxonomy. The CLI maps each kind onto its own exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class LockError : public Error {
 public:
  using Error::Error;
};

using Instant = std::chrono::sys_seconds;

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::string_view kUnbinnedLabel = "unbinned";

// Parses `text` with a strptime(3) format, interpreted as UTC.
std::optional<Instant> parse_utc(const std::string& text, const std::string& format);

// "2013-02-09T14:03:11Z"
std::string format_iso8601(Instant t);

// Day-wide bins are labelled "YYYY-MM-DD"; narrower bins carry the full
// ISO-8601 start instant so labels still sort chronologically.
Instant bin_start(Instant t, std::int64_t bin_width_seconds);
std::string bin_label(Instant t, std::int64_t bin_width_seconds);

// FNV-1a, 64 bit. Used for artifact fingerprints, not for security.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Runs body(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots by the caller, which keeps output order
// independent of scheduling. The first exception thrown by a body is
// rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

// Shared progress counter readable from other threads.
struct Progress {
  std::atomic<std::size_t> done{0};
  std::atomic<std::size_t> total{0};

  double fraction() const {
    auto t = total.load();
    return t == 0 ? 1.0 : static_cast<double>(done.load()) / static_cast<double>(t);
  }
};

}  // namespace mbda

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mbda/util.hpp"

namespace mbda {

// How a record's timestamp is found: a regex with one capture group, and
// the strptime(3) format applied to the captured text (UTC).
struct TimestampSpec {
  std::string pattern = R"(^(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2})Z)";
  std::string format = "%Y-%m-%dT%H:%M:%S";

  bool operator==(const TimestampSpec&) const = default;
};

struct LogEntry {
  std::string raw_text;
  Instant timestamp{};
  std::string source_id;
  std::uint64_t offset = 0;

  bool operator==(const LogEntry&) const = default;
};

// Non-owning view handed to visitors; valid only during the callback.
struct LogEntryView {
  std::string_view raw_text;
  Instant timestamp{};
  std::uint64_t offset = 0;
};

// One (file, time bin) pair. A file spanning several bins yields several
// chunks; records whose timestamp does not parse go to an "unbinned" chunk.
struct Chunk {
  std::string path;
  std::string label;
  std::uint64_t entry_count = 0;
  std::uint64_t file_bytes = 0;

  bool unbinned() const { return label == kUnbinnedLabel; }
  bool operator==(const Chunk&) const = default;
};

struct ScanIssue {
  std::string path;
  std::string message;

  bool operator==(const ScanIssue&) const = default;
};

struct CorpusManifest {
  std::vector<Chunk> chunks;
  TimestampSpec timestamp;
  std::string record_delimiter = "\n";
  std::int64_t bin_width = kSecondsPerDay;
  std::vector<ScanIssue> issues;
  std::uint64_t unparsable_records = 0;

  // Sorted, distinct, excluding "unbinned".
  std::vector<std::string> bin_labels() const;
  std::vector<std::size_t> chunks_for(std::string_view label) const;
  std::uint64_t total_entries() const;
  // Stable hash of the serialized manifest; used to detect stale reports.
  std::string fingerprint() const;

  bool operator==(const CorpusManifest&) const = default;
};

void to_json(nlohmann::json& j, const TimestampSpec& t);
void from_json(const nlohmann::json& j, TimestampSpec& t);
void to_json(nlohmann::json& j, const CorpusManifest& m);
void from_json(const nlohmann::json& j, CorpusManifest& m);

void save_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

// Files are visited in lexicographic path order; directories recursively.
CorpusManifest scan_corpus(const std::vector<std::string>& root_paths,
                           const TimestampSpec& timestamp = {},
                           const std::string& record_delimiter = "\n",
                           std::int64_t bin_width = kSecondsPerDay);

// Streams the chunk's records in file order. Throws DataError naming the
// chunk if its file cannot be read.
void visit_entries(const CorpusManifest& manifest, std::size_t chunk_id,
                   const std::function<void(const LogEntryView&)>& visitor);

std::vector<LogEntry> read_entries(const CorpusManifest& manifest, std::size_t chunk_id);

// Splits `data` on `delimiter`, skipping empty records.
void for_each_record(std::string_view data, std::string_view delimiter,
                     const std::function<void(std::string_view, std::uint64_t)>& fn);

}  // namespace mbda

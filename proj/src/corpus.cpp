#include "mbda/corpus.hpp"

#include <algorithm>
#include <boost/regex.hpp>
#include <filesystem>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;

namespace mbda {

namespace {

class TimestampParser {
 public:
  TimestampParser(const TimestampSpec& spec, std::int64_t bin_width)
      : format_(spec.format), bin_width_(bin_width) {
    try {
      re_.assign(spec.pattern);
    } catch (const boost::regex_error& e) {
      throw ConfigError("timestamp pattern does not compile: " + std::string(e.what()));
    }
    if (re_.mark_count() != 1) throw ConfigError("timestamp pattern needs exactly one capture group");
  }

  std::optional<Instant> parse(std::string_view record) {
    boost::match_results<std::string_view::const_iterator> m;
    if (!boost::regex_search(record.begin(), record.end(), m, re_)) return std::nullopt;
    scratch_.assign(m[1].first, m[1].second);
    return parse_utc(scratch_, format_);
  }

  std::int64_t bin_of(Instant t) const { return bin_start(t, bin_width_).time_since_epoch().count(); }
  std::string label_of_bin(std::int64_t start) const {
    return bin_label(Instant{std::chrono::seconds{start}}, bin_width_);
  }

 private:
  boost::regex re_;
  std::string format_;
  std::int64_t bin_width_;
  std::string scratch_;
};

}  // namespace

void for_each_record(std::string_view data, std::string_view delimiter,
                     const std::function<void(std::string_view, std::uint64_t)>& fn) {
  if (delimiter.empty()) throw ConfigError("record delimiter must not be empty");
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t next = data.find(delimiter, pos);
    std::size_t end = next == std::string_view::npos ? data.size() : next;
    if (end > pos) fn(data.substr(pos, end - pos), pos);
    if (next == std::string_view::npos) break;
    pos = next + delimiter.size();
  }
}

std::vector<std::string> CorpusManifest::bin_labels() const {
  std::vector<std::string> out;
  for (const auto& c : chunks)
    if (!c.unbinned()) out.push_back(c.label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> CorpusManifest::chunks_for(std::string_view label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < chunks.size(); ++i)
    if (chunks[i].label == label) out.push_back(i);
  return out;
}

std::uint64_t CorpusManifest::total_entries() const {
  std::uint64_t n = 0;
  for (const auto& c : chunks) n += c.entry_count;
  return n;
}

std::string CorpusManifest::fingerprint() const {
  json j = *this;
  return hex64(fnv1a(j.dump()));
}

void to_json(json& j, const TimestampSpec& t) {
  j = json{{"pattern", t.pattern}, {"format", t.format}};
}

void from_json(const json& j, TimestampSpec& t) {
  j.at("pattern").get_to(t.pattern);
  j.at("format").get_to(t.format);
}

void to_json(json& j, const CorpusManifest& m) {
  json chunks = json::array();
  for (const auto& c : m.chunks)
    chunks.push_back({{"path", c.path}, {"label", c.label}, {"entry_count", c.entry_count},
                      {"file_bytes", c.file_bytes}});
  json issues = json::array();
  for (const auto& i : m.issues) issues.push_back({{"path", i.path}, {"message", i.message}});
  j = json{{"chunks", chunks},
           {"timestamp", m.timestamp},
           {"record_delimiter", m.record_delimiter},
           {"bin_width", m.bin_width},
           {"issues", issues},
           {"unparsable_records", m.unparsable_records}};
}

void from_json(const json& j, CorpusManifest& m) {
  m = CorpusManifest{};
  for (const auto& c : j.at("chunks"))
    m.chunks.push_back({c.at("path").get<std::string>(), c.at("label").get<std::string>(),
                        c.at("entry_count").get<std::uint64_t>(),
                        c.value("file_bytes", std::uint64_t{0})});
  j.at("timestamp").get_to(m.timestamp);
  j.at("record_delimiter").get_to(m.record_delimiter);
  m.bin_width = j.value("bin_width", kSecondsPerDay);
  if (j.contains("issues"))
    for (const auto& i : j.at("issues"))
      m.issues.push_back({i.at("path").get<std::string>(), i.at("message").get<std::string>()});
  m.unparsable_records = j.value("unparsable_records", std::uint64_t{0});
}

void save_manifest(const CorpusManifest& m, const std::string& path) {
  write_file(path, json(m).dump(2) + "\n");
}

CorpusManifest load_manifest(const std::string& path) {
  try {
    return json::parse(read_file(path)).get<CorpusManifest>();
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
}

CorpusManifest scan_corpus(const std::vector<std::string>& root_paths, const TimestampSpec& timestamp,
                           const std::string& record_delimiter, std::int64_t bin_width) {
  if (bin_width <= 0) throw ConfigError("bin width must be positive");
  CorpusManifest manifest;
  manifest.timestamp = timestamp;
  manifest.record_delimiter = record_delimiter;
  manifest.bin_width = bin_width;

  std::vector<std::string> files;
  for (const auto& root : root_paths) {
    std::error_code ec;
    fs::path p = fs::absolute(root, ec).lexically_normal();
    if (fs::is_directory(p, ec)) {
      for (fs::recursive_directory_iterator it(p, ec), end; !ec && it != end; it.increment(ec))
        if (it->is_regular_file(ec)) files.push_back(it->path().string());
      if (ec) manifest.issues.push_back({p.string(), ec.message()});
    } else if (fs::is_regular_file(p, ec)) {
      files.push_back(p.string());
    } else {
      manifest.issues.push_back({p.string(), "not a readable file or directory"});
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());

  TimestampParser parser(timestamp, bin_width);
  std::vector<Chunk> binned, unbinned;
  for (const auto& path : files) {
    std::string data;
    try {
      data = read_file(path);
    } catch (const DataError& e) {
      manifest.issues.push_back({path, e.what()});
      continue;
    }
    std::map<std::int64_t, std::uint64_t> counts;
    std::uint64_t bad = 0;
    for_each_record(data, record_delimiter, [&](std::string_view rec, std::uint64_t) {
      auto t = parser.parse(rec);
      if (t)
        ++counts[parser.bin_of(*t)];
      else
        ++bad;
    });
    for (const auto& [start, n] : counts)
      binned.push_back({path, parser.label_of_bin(start), n, data.size()});
    if (bad > 0) unbinned.push_back({path, std::string(kUnbinnedLabel), bad, data.size()});
    manifest.unparsable_records += bad;
  }
  std::stable_sort(binned.begin(), binned.end(),
                   [](const Chunk& a, const Chunk& b) { return a.label < b.label; });
  manifest.chunks = std::move(binned);
  manifest.chunks.insert(manifest.chunks.end(), unbinned.begin(), unbinned.end());
  return manifest;
}

void visit_entries(const CorpusManifest& manifest, std::size_t chunk_id,
                   const std::function<void(const LogEntryView&)>& visitor) {
  if (chunk_id >= manifest.chunks.size())
    throw DataError("chunk " + std::to_string(chunk_id) + " not in manifest");
  const Chunk& chunk = manifest.chunks[chunk_id];
  std::string data;
  try {
    data = read_file(chunk.path);
  } catch (const DataError& e) {
    throw DataError("chunk " + std::to_string(chunk_id) + " (" + chunk.label + ", " + chunk.path +
                    "): " + e.what());
  }
  TimestampParser parser(manifest.timestamp, manifest.bin_width);
  const bool want_unbinned = chunk.unbinned();
  std::optional<std::int64_t> wanted_bin;
  if (!want_unbinned) {
    const bool day_label = manifest.bin_width % kSecondsPerDay == 0;
    auto start = parse_utc(chunk.label, day_label ? "%Y-%m-%d" : "%Y-%m-%dT%H:%M:%SZ");
    if (!start) throw DataError("chunk " + std::to_string(chunk_id) + " has malformed label " + chunk.label);
    wanted_bin = start->time_since_epoch().count();
  }
  for_each_record(data, manifest.record_delimiter, [&](std::string_view rec, std::uint64_t off) {
    auto t = parser.parse(rec);
    if (want_unbinned) {
      if (!t) visitor(LogEntryView{rec, Instant{}, off});
      return;
    }
    if (t && parser.bin_of(*t) == *wanted_bin) visitor(LogEntryView{rec, *t, off});
  });
}

std::vector<LogEntry> read_entries(const CorpusManifest& manifest, std::size_t chunk_id) {
  std::vector<LogEntry> out;
  if (chunk_id < manifest.chunks.size()) out.reserve(manifest.chunks[chunk_id].entry_count);
  visit_entries(manifest, chunk_id, [&](const LogEntryView& e) {
    out.push_back({std::string(e.raw_text), e.timestamp, manifest.chunks[chunk_id].path, e.offset});
  });
  return out;
}

}  // namespace mbda

#include <algorithm>
#include <set>

#include "mbda/deparse.hpp"

using nlohmann::json;

namespace mbda {

json to_json(const AnomalyCase& c) {
  return {{"id", c.id}, {"bins", c.bins}, {"features", c.features}, {"created_at", c.created_at}, {"notes", c.notes}};
}

AnomalyCase case_from_json(const json& j) {
  AnomalyCase c;
  j.at("id").get_to(c.id);
  j.at("bins").get_to(c.bins);
  c.features = j.value("features", std::vector<std::string>{});
  c.created_at = j.value("created_at", std::string{});
  c.notes = j.value("notes", std::string{});
  return c;
}

void validate_case(const AnomalyCase& c, const ParserConfig& config, const std::vector<std::string>& known_bins) {
  if (c.features.empty()) throw ConfigError("case " + c.id + " has no features");
  if (c.bins.empty()) throw DataError("case " + c.id + " has no bins");
  for (const auto& f : c.features)
    if (!config.find_feature(f)) throw ConfigError("case " + c.id + ": '" + f + "' is not a parser feature");
  std::set<std::string> known(known_bins.begin(), known_bins.end());
  for (const auto& b : c.bins)
    if (!known.count(b)) throw DataError("case " + c.id + ": unknown bin " + b);
}

json to_json(const DeparseReport& r) {
  // Entries are stored compactly: [source, offset, bin, timestamp,
  // match_count, [feature indices into case_features]].
  std::vector<std::string> sources;
  std::map<std::string, std::size_t> source_index;
  json entries = json::array();
  for (const auto& e : r.entries) {
    auto [it, fresh] = source_index.try_emplace(e.path, sources.size());
    if (fresh) sources.push_back(e.path);
    json feats = json::array();
    for (const auto& f : e.features)
      feats.push_back(std::find(r.case_features.begin(), r.case_features.end(), f) - r.case_features.begin());
    entries.push_back({it->second, e.offset, e.bin, format_iso8601(e.timestamp), e.match_count, feats});
  }
  return {{"case", r.case_id},
          {"manifest_fingerprint", r.manifest_fingerprint},
          {"case_features", r.case_features},
          {"bins", r.bins},
          {"totals", {{"matched", r.matched_entries}, {"total", r.total_entries}}},
          {"actors", r.actors},
          {"gaps", r.gaps},
          {"warnings", r.warnings},
          {"sources", sources},
          {"entries", entries}};
}

DeparseReport report_from_json(const json& j) {
  try {
    DeparseReport r;
    j.at("case").get_to(r.case_id);
    j.at("manifest_fingerprint").get_to(r.manifest_fingerprint);
    j.at("case_features").get_to(r.case_features);
    j.at("bins").get_to(r.bins);
    j.at("totals").at("matched").get_to(r.matched_entries);
    j.at("totals").at("total").get_to(r.total_entries);
    j.at("actors").get_to(r.actors);
    j.at("gaps").get_to(r.gaps);
    j.at("warnings").get_to(r.warnings);
    const auto sources = j.at("sources").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      EntryRef ref;
      ref.path = sources.at(e.at(0).get<std::size_t>());
      ref.offset = e.at(1).get<std::uint64_t>();
      ref.bin = e.at(2).get<std::string>();
      ref.timestamp = parse_utc(e.at(3).get<std::string>(), "%Y-%m-%dT%H:%M:%SZ").value_or(Instant{});
      ref.match_count = e.at(4).get<int>();
      for (const auto& f : e.at(5)) ref.features.push_back(r.case_features.at(f.get<std::size_t>()));
      r.entries.push_back(std::move(ref));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed de-parse report: ") + e.what());
  }
}

void save_report(const DeparseReport& r, const std::string& path) { write_file(path, to_json(r).dump() + "\n"); }

DeparseReport load_report(const std::string& path) {
  try {
    return report_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

DeparseReport deparse(const CorpusManifest& manifest, const AnomalyCase& c, const ParserConfig& config,
                      const DeparseOptions& options) {
  validate_case(c, config, manifest.bin_labels());
  Matcher matcher(config);

  std::vector<std::size_t> case_cols;
  for (const auto& f : c.features)
    for (std::size_t i = 0; i < config.features.size(); ++i)
      if (config.features[i].name == f) case_cols.push_back(i);

  DeparseReport report;
  report.case_id = c.id;
  report.manifest_fingerprint = manifest.fingerprint();
  report.case_features = c.features;
  report.bins = c.bins;
  std::sort(report.bins.begin(), report.bins.end());

  std::vector<std::size_t> actor_vars;
  std::vector<std::string> actor_names;
  for (const auto& a : options.actor_variables) {
    auto idx = matcher.variable_index(a);
    if (idx < 0) {
      report.warnings.push_back("actor variable " + a + " not in config; column omitted");
      continue;
    }
    actor_vars.push_back(static_cast<std::size_t>(idx));
    actor_names.push_back(a);
  }

  std::vector<std::size_t> chunk_ids;
  for (const auto& b : report.bins)
    for (auto id : manifest.chunks_for(b)) chunk_ids.push_back(id);

  struct Partial {
    std::vector<EntryRef> entries;
    std::uint64_t total = 0;
    std::vector<std::set<std::string>> actors;
    std::string gap;
  };
  std::vector<Partial> parts(chunk_ids.size());
  if (options.progress) {
    options.progress->total = chunk_ids.size();
    options.progress->done = 0;
  }
  parallel_for(chunk_ids.size(), options.workers, [&](std::size_t k) {
    Partial& p = parts[k];
    p.actors.resize(actor_vars.size());
    const auto& chunk = manifest.chunks[chunk_ids[k]];
    std::vector<char> hits;
    std::vector<std::string> values;
    try {
      visit_entries(manifest, chunk_ids[k], [&](const LogEntryView& e) {
        ++p.total;
        matcher.mark_features(e.raw_text, hits);
        EntryRef ref;
        for (std::size_t i = 0; i < case_cols.size(); ++i)
          if (hits[case_cols[i]]) ref.features.push_back(c.features[i]);
        if (ref.features.empty()) return;
        ref.path = chunk.path;
        ref.offset = e.offset;
        ref.bin = chunk.label;
        ref.timestamp = e.timestamp;
        ref.match_count = static_cast<int>(ref.features.size());
        p.entries.push_back(std::move(ref));
        for (std::size_t a = 0; a < actor_vars.size(); ++a) {
          matcher.capture_values(e.raw_text, actor_vars[a], values);
          p.actors[a].insert(values.begin(), values.end());
        }
      });
    } catch (const DataError& err) {
      p = Partial{};
      p.actors.resize(actor_vars.size());
      p.gap = err.what();
    }
    if (options.progress) ++options.progress->done;
  });

  std::vector<std::set<std::string>> actors(actor_vars.size());
  for (auto& p : parts) {
    if (!p.gap.empty()) report.gaps.push_back(p.gap);
    report.total_entries += p.total;
    for (auto& e : p.entries) report.entries.push_back(std::move(e));
    for (std::size_t a = 0; a < actors.size(); ++a) actors[a].insert(p.actors[a].begin(), p.actors[a].end());
  }
  std::stable_sort(report.entries.begin(), report.entries.end(), [](const EntryRef& a, const EntryRef& b) {
    if (a.match_count != b.match_count) return a.match_count > b.match_count;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.path != b.path) return a.path < b.path;
    return a.offset < b.offset;
  });
  report.matched_entries = report.entries.size();
  for (std::size_t a = 0; a < actors.size(); ++a) report.actors[actor_names[a]] = actors[a].size();
  return report;
}

ActorTable summarize(const DeparseReport& report) {
  ActorTable t;
  t.matched = report.matched_entries;
  t.total = report.total_entries;
  t.fraction = t.total == 0 ? 0.0 : static_cast<double>(t.matched) / static_cast<double>(t.total);
  t.actors = report.actors;
  return t;
}

json to_json(const ActorTable& t) {
  return {{"matched", t.matched}, {"total", t.total}, {"fraction", t.fraction}, {"actors", t.actors}};
}

std::vector<LogEntry> materialize(const CorpusManifest& manifest, const DeparseReport& report) {
  std::map<std::string, std::string> files;
  std::vector<LogEntry> out;
  out.reserve(report.entries.size());
  for (const auto& ref : report.entries) {
    auto it = files.find(ref.path);
    if (it == files.end()) it = files.emplace(ref.path, read_file(ref.path)).first;
    const std::string& data = it->second;
    if (ref.offset >= data.size()) throw DataError("offset " + std::to_string(ref.offset) + " beyond " + ref.path);
    auto end = data.find(manifest.record_delimiter, ref.offset);
    if (end == std::string::npos) end = data.size();
    out.push_back({data.substr(ref.offset, end - ref.offset), ref.timestamp, ref.path, ref.offset});
  }
  return out;
}

EntryExclusions exclusions_of(const DeparseReport& report) {
  EntryExclusions out;
  for (const auto& e : report.entries) out[e.path].insert(e.offset);
  return out;
}

}  // namespace mbda

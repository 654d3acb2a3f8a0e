#pragma once

#include <map>
#include <string>
#include <vector>

#include "mbda/faac.hpp"

namespace mbda {

struct AnomalyCase {
  std::string id;
  std::vector<std::string> bins;
  std::vector<std::string> features;
  std::string created_at;
  std::string notes;
};

nlohmann::json to_json(const AnomalyCase& c);
AnomalyCase case_from_json(const nlohmann::json& j);

// Throws ConfigError if a feature is not a config feature, DataError if a
// bin is unknown to `known_bins`.
void validate_case(const AnomalyCase& c, const ParserConfig& config, const std::vector<std::string>& known_bins);

struct EntryRef {
  std::string path;
  std::uint64_t offset = 0;
  std::string bin;
  Instant timestamp{};
  std::vector<std::string> features;  // case features the entry matches
  int match_count = 0;

  bool operator==(const EntryRef&) const = default;
};

struct DeparseReport {
  std::string case_id;
  std::string manifest_fingerprint;
  std::vector<std::string> case_features;
  std::vector<std::string> bins;
  std::vector<EntryRef> entries;  // match_count desc, then timestamp
  std::uint64_t matched_entries = 0;
  std::uint64_t total_entries = 0;
  std::map<std::string, std::uint64_t> actors;  // distinct values per actor variable
  std::vector<std::string> gaps;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const DeparseReport& r);
DeparseReport report_from_json(const nlohmann::json& j);
void save_report(const DeparseReport& r, const std::string& path);
DeparseReport load_report(const std::string& path);

struct DeparseOptions {
  std::size_t workers = 1;
  std::vector<std::string> actor_variables;
  Progress* progress = nullptr;
};

DeparseReport deparse(const CorpusManifest& manifest, const AnomalyCase& c, const ParserConfig& config,
                      const DeparseOptions& options = {});

struct ActorTable {
  std::uint64_t matched = 0;
  std::uint64_t total = 0;
  double fraction = 0;
  std::map<std::string, std::uint64_t> actors;
};

ActorTable summarize(const DeparseReport& report);
nlohmann::json to_json(const ActorTable& t);

// Raw text of each referenced entry, in report order.
std::vector<LogEntry> materialize(const CorpusManifest& manifest, const DeparseReport& report);

// Source path -> offsets, for log-wise re-parsing.
EntryExclusions exclusions_of(const DeparseReport& report);

// Manufacturer for a MAC's OUI from a bundled table, or "unregistered".
std::string oui_manufacturer(std::string_view mac);

enum class NodeKind { kStation, kAp };

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::kStation;
  std::string label;
  std::uint64_t weight = 0;
};

struct GraphEdge {
  std::string station;
  std::string ap;
  std::uint64_t weight = 0;
};

struct ConnectionGraph {
  std::vector<GraphNode> nodes;  // sorted by id
  std::vector<GraphEdge> edges;  // sorted by (station, ap)
};

// Node weight: entries mentioning the node. Edge weight: entries mentioning
// both endpoints.
ConnectionGraph build_graph(const std::vector<std::string_view>& entries, const ParserConfig& config,
                            const std::string& station_var, const std::string& ap_var);
ConnectionGraph build_graph(const std::vector<LogEntry>& entries, const ParserConfig& config,
                            const std::string& station_var, const std::string& ap_var);
// Every entry in the given bins.
ConnectionGraph build_graph_window(const CorpusManifest& manifest, const std::vector<std::string>& bins,
                                   const ParserConfig& config, const std::string& station_var,
                                   const std::string& ap_var, std::size_t workers = 1);

// Drops nodes below node_min, edges below edge_min and edges left dangling.
ConnectionGraph filter_graph(const ConnectionGraph& g, std::uint64_t node_min, std::uint64_t edge_min);

enum class GraphFormat { kGexf, kCsv, kJson };
GraphFormat graph_format_from_string(const std::string& s);

std::string graph_to_gexf(const ConnectionGraph& g);
std::string graph_to_csv(const ConnectionGraph& g);
nlohmann::json graph_to_json(const ConnectionGraph& g);

void export_graph(const ConnectionGraph& g, std::uint64_t node_min, std::uint64_t edge_min,
                  const std::string& path, GraphFormat format);

}  // namespace mbda

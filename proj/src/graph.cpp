#include <algorithm>
#include <map>
#include <set>

#include "mbda/deparse.hpp"

using nlohmann::json;

namespace mbda {

namespace {

struct Oui {
  const char* prefix;
  const char* manufacturer;
};

constexpr Oui kOuiTable[] = {
    {"00:00:0c", "Cisco"},           {"00:03:93", "Apple"},
    {"00:13:e8", "Intel"},           {"00:16:32", "Samsung"},
    {"00:17:f2", "Apple"},           {"00:1b:21", "Intel"},
    {"00:1e:0b", "Hewlett Packard"}, {"00:a0:f8", "Zebra Technologies"},
};

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

const char* kind_name(NodeKind k) { return k == NodeKind::kStation ? "station" : "ap"; }

class GraphBuilder {
 public:
  GraphBuilder(const ParserConfig& config, const std::string& station_var, const std::string& ap_var)
      : matcher_(config) {
    auto s = matcher_.variable_index(station_var);
    auto a = matcher_.variable_index(ap_var);
    if (s < 0) throw ConfigError("station variable " + station_var + " not in config");
    if (a < 0) throw ConfigError("AP variable " + ap_var + " not in config");
    station_ = static_cast<std::size_t>(s);
    ap_ = static_cast<std::size_t>(a);
  }

  void add(std::string_view entry) {
    matcher_.capture_values(entry, station_, stations_);
    matcher_.capture_values(entry, ap_, aps_);
    for (const auto& s : stations_) ++station_weight_[s];
    for (const auto& a : aps_) ++ap_weight_[a];
    for (const auto& s : stations_)
      for (const auto& a : aps_) ++edge_weight_[{s, a}];
  }

  void merge(const GraphBuilder& other) {
    for (const auto& [k, v] : other.station_weight_) station_weight_[k] += v;
    for (const auto& [k, v] : other.ap_weight_) ap_weight_[k] += v;
    for (const auto& [k, v] : other.edge_weight_) edge_weight_[k] += v;
  }

  ConnectionGraph finish() const {
    ConnectionGraph g;
    for (const auto& [mac, w] : station_weight_) g.nodes.push_back({"sta:" + mac, NodeKind::kStation, oui_manufacturer(mac), w});
    for (const auto& [name, w] : ap_weight_) g.nodes.push_back({"ap:" + name, NodeKind::kAp, name, w});
    std::sort(g.nodes.begin(), g.nodes.end(), [](const GraphNode& a, const GraphNode& b) { return a.id < b.id; });
    for (const auto& [key, w] : edge_weight_) g.edges.push_back({"sta:" + key.first, "ap:" + key.second, w});
    return g;
  }

 private:
  Matcher matcher_;
  std::size_t station_ = 0;
  std::size_t ap_ = 0;
  std::vector<std::string> stations_, aps_;
  std::map<std::string, std::uint64_t> station_weight_, ap_weight_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> edge_weight_;
};

}  // namespace

std::string oui_manufacturer(std::string_view mac) {
  if (mac.size() < 8) return "unregistered";
  std::string prefix(mac.substr(0, 8));
  std::transform(prefix.begin(), prefix.end(), prefix.begin(),
                 [](unsigned char c) { return static_cast<char>(c == '-' ? ':' : std::tolower(c)); });
  for (const auto& o : kOuiTable)
    if (prefix == o.prefix) return o.manufacturer;
  return "unregistered";
}

ConnectionGraph build_graph(const std::vector<std::string_view>& entries, const ParserConfig& config,
                            const std::string& station_var, const std::string& ap_var) {
  GraphBuilder b(config, station_var, ap_var);
  for (auto e : entries) b.add(e);
  return b.finish();
}

ConnectionGraph build_graph(const std::vector<LogEntry>& entries, const ParserConfig& config,
                            const std::string& station_var, const std::string& ap_var) {
  std::vector<std::string_view> views;
  views.reserve(entries.size());
  for (const auto& e : entries) views.push_back(e.raw_text);
  return build_graph(views, config, station_var, ap_var);
}

ConnectionGraph build_graph_window(const CorpusManifest& manifest, const std::vector<std::string>& bins,
                                   const ParserConfig& config, const std::string& station_var,
                                   const std::string& ap_var, std::size_t workers) {
  std::vector<std::size_t> ids;
  for (const auto& b : bins)
    for (auto id : manifest.chunks_for(b)) ids.push_back(id);
  std::vector<GraphBuilder> parts;
  parts.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) parts.emplace_back(config, station_var, ap_var);
  parallel_for(ids.size(), workers, [&](std::size_t k) {
    visit_entries(manifest, ids[k], [&](const LogEntryView& e) { parts[k].add(e.raw_text); });
  });
  GraphBuilder total(config, station_var, ap_var);
  for (const auto& p : parts) total.merge(p);
  return total.finish();
}

ConnectionGraph filter_graph(const ConnectionGraph& g, std::uint64_t node_min, std::uint64_t edge_min) {
  ConnectionGraph out;
  std::set<std::string> kept;
  for (const auto& n : g.nodes)
    if (n.weight >= node_min) {
      out.nodes.push_back(n);
      kept.insert(n.id);
    }
  for (const auto& e : g.edges)
    if (e.weight >= edge_min && kept.count(e.station) && kept.count(e.ap)) out.edges.push_back(e);
  return out;
}

GraphFormat graph_format_from_string(const std::string& s) {
  if (s == "gexf") return GraphFormat::kGexf;
  if (s == "csv") return GraphFormat::kCsv;
  if (s == "json") return GraphFormat::kJson;
  throw ConfigError("unknown graph format '" + s + "' (gexf | csv | json)");
}

std::string graph_to_gexf(const ConnectionGraph& g) {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<gexf xmlns=\"http://gexf.net/1.2\" version=\"1.2\">\n";
  out += "  <meta>\n    <creator>mbda</creator>\n    <description>station-AP connections</description>\n  </meta>\n";
  out += "  <graph mode=\"static\" defaultedgetype=\"undirected\">\n";
  out += "    <attributes class=\"node\">\n";
  out += "      <attribute id=\"kind\" title=\"kind\" type=\"string\"/>\n";
  out += "      <attribute id=\"entries\" title=\"entries\" type=\"long\"/>\n";
  out += "    </attributes>\n";
  out += "    <nodes>\n";
  for (const auto& n : g.nodes) {
    out += "      <node id=\"" + xml_escape(n.id) + "\" label=\"" + xml_escape(n.label) + "\">\n";
    out += "        <attvalues>\n";
    out += "          <attvalue for=\"kind\" value=\"" + std::string(kind_name(n.kind)) + "\"/>\n";
    out += "          <attvalue for=\"entries\" value=\"" + std::to_string(n.weight) + "\"/>\n";
    out += "        </attvalues>\n";
    out += "      </node>\n";
  }
  out += "    </nodes>\n";
  out += "    <edges>\n";
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    out += "      <edge id=\"" + std::to_string(i) + "\" source=\"" + xml_escape(e.station) + "\" target=\"" +
           xml_escape(e.ap) + "\" weight=\"" + std::to_string(e.weight) + "\"/>\n";
  }
  out += "    </edges>\n";
  out += "  </graph>\n";
  out += "</gexf>\n";
  return out;
}

std::string graph_to_csv(const ConnectionGraph& g) {
  std::map<std::string, std::string> labels;
  for (const auto& n : g.nodes) labels[n.id] = n.label;
  std::string out = "source,target,weight,source_label,target_label\n";
  for (const auto& e : g.edges)
    out += csv_field(e.station) + "," + csv_field(e.ap) + "," + std::to_string(e.weight) + "," +
           csv_field(labels[e.station]) + "," + csv_field(labels[e.ap]) + "\n";
  return out;
}

json graph_to_json(const ConnectionGraph& g) {
  json nodes = json::array(), links = json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"id", n.id}, {"kind", kind_name(n.kind)}, {"label", n.label}, {"weight", n.weight}});
  for (const auto& e : g.edges) links.push_back({{"source", e.station}, {"target", e.ap}, {"weight", e.weight}});
  return {{"directed", false}, {"nodes", nodes}, {"links", links}};
}

void export_graph(const ConnectionGraph& g, std::uint64_t node_min, std::uint64_t edge_min, const std::string& path,
                  GraphFormat format) {
  const auto filtered = filter_graph(g, node_min, edge_min);
  switch (format) {
    case GraphFormat::kGexf: write_file(path, graph_to_gexf(filtered)); break;
    case GraphFormat::kCsv: write_file(path, graph_to_csv(filtered)); break;
    case GraphFormat::kJson: write_file(path, graph_to_json(filtered).dump(2) + "\n"); break;
  }
}

}  // namespace mbda

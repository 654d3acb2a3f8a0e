#include <algorithm>
#include <cmath>
#include <set>

#include "mbda/learning.hpp"

using nlohmann::json;

namespace mbda {

void LearningParams::validate() const {
  if (!(presence_threshold > 0 && presence_threshold < 1))
    throw ConfigError("presence_threshold must be in (0,1)");
  if (!(variance_ratio_threshold > 0 && variance_ratio_threshold < 1))
    throw ConfigError("variance_ratio_threshold must be in (0,1)");
}

std::string feature_name(const std::string& variable, const std::string& value) {
  return variable + "=" + value;
}

std::string default_feature_name(const std::string& variable) { return variable + "=<ANY>"; }

namespace {

using Key = std::pair<std::string, std::string>;

ParserConfig defaults_only(const std::vector<VariableDef>& variables) {
  ParserConfig c;
  c.variables = variables;
  for (const auto& v : variables)
    c.features.push_back({default_feature_name(v.name), v.name, MatchKind::kDefault, ""});
  return c;
}

class ChunkAccumulator {
 public:
  explicit ChunkAccumulator(const std::vector<VariableDef>& variables)
      : matcher_(defaults_only(variables)), variables_(variables) {}

  void add(std::string_view entry) {
    ++entries_;
    for (std::size_t v = 0; v < variables_.size(); ++v) {
      matcher_.capture_values(entry, v, values_, false);
      if (values_.empty()) continue;
      for (const auto& val : values_) ++occurrences_[{variables_[v].name, val}];
      std::sort(values_.begin(), values_.end());
      values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
      for (const auto& val : values_) ++entries_with_[{variables_[v].name, val}];
    }
  }

  ChunkLearning finish(std::string label, double threshold) {
    ChunkLearning out;
    out.label = std::move(label);
    out.entry_count = entries_;
    if (entries_ > 0)
      for (const auto& [key, n] : entries_with_) {
        double presence = static_cast<double>(n) / static_cast<double>(entries_);
        if (presence >= threshold) out.candidates.push_back({key.first, key.second, presence});
      }
    std::sort(out.candidates.begin(), out.candidates.end(),
              [](const CandidateFeature& a, const CandidateFeature& b) {
                if (a.presence != b.presence) return a.presence > b.presence;
                return std::tie(a.variable, a.value) < std::tie(b.variable, b.value);
              });
    out.occurrences = std::move(occurrences_);
    return out;
  }

 private:
  Matcher matcher_;
  std::vector<VariableDef> variables_;
  std::uint64_t entries_ = 0;
  std::vector<std::string> values_;
  std::map<Key, std::int64_t> occurrences_;
  std::map<Key, std::int64_t> entries_with_;
};

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

json to_json(const ChunkLearning& c) {
  json candidates = json::array();
  for (const auto& k : c.candidates)
    candidates.push_back({{"variable", k.variable}, {"value", k.value}, {"presence", k.presence}});
  json occ = json::array();
  for (const auto& [key, n] : c.occurrences) occ.push_back({key.first, key.second, n});
  return {{"label", c.label}, {"entry_count", c.entry_count}, {"candidates", candidates},
          {"occurrences", occ}};
}

ChunkLearning chunk_learning_from_json(const json& j) {
  ChunkLearning c;
  j.at("label").get_to(c.label);
  j.at("entry_count").get_to(c.entry_count);
  for (const auto& k : j.at("candidates"))
    c.candidates.push_back({k.at("variable").get<std::string>(), k.at("value").get<std::string>(),
                            k.at("presence").get<double>()});
  for (const auto& o : j.at("occurrences"))
    c.occurrences[{o.at(0).get<std::string>(), o.at(1).get<std::string>()}] = o.at(2).get<std::int64_t>();
  return c;
}

std::vector<CandidateFeature> learn_chunk(const std::vector<LogEntry>& entries,
                                          const std::vector<VariableDef>& variables,
                                          double presence_threshold) {
  if (variables.empty()) throw ConfigError("learning needs at least one variable");
  ChunkAccumulator acc(variables);
  for (const auto& e : entries) acc.add(e.raw_text);
  return acc.finish({}, presence_threshold).candidates;
}

ChunkLearning learn_chunk_stats(const CorpusManifest& manifest, std::size_t chunk_id,
                                const std::vector<VariableDef>& variables, double presence_threshold) {
  if (variables.empty()) throw ConfigError("learning needs at least one variable");
  ChunkAccumulator acc(variables);
  visit_entries(manifest, chunk_id, [&](const LogEntryView& e) { acc.add(e.raw_text); });
  return acc.finish(manifest.chunks.at(chunk_id).label, presence_threshold);
}

MergeOutcome merge_learned(const std::vector<ChunkLearning>& chunks,
                           const std::vector<VariableDef>& variables, const LearningParams& params) {
  params.validate();
  if (chunks.size() < 2) throw DataError("merging learned features needs at least two chunks");

  std::vector<double> totals;
  for (const auto& c : chunks) totals.push_back(static_cast<double>(c.entry_count));
  const double reference = sample_variance(totals);
  const double threshold = params.variance_ratio_threshold * reference;

  std::set<Key> union_keys;
  for (const auto& c : chunks)
    for (const auto& k : c.candidates) union_keys.insert({k.variable, k.value});

  struct Survivor {
    Key key;
    double total;
  };
  std::vector<Survivor> survivors;
  for (const auto& key : union_keys) {
    std::vector<double> series;
    double total = 0;
    for (const auto& c : chunks) {
      auto it = c.occurrences.find(key);
      double n = it == c.occurrences.end() ? 0.0 : static_cast<double>(it->second);
      series.push_back(n);
      total += n;
    }
    double var = sample_variance(series);
    if (var > 0 && var >= threshold) survivors.push_back({key, total});
  }

  MergeOutcome out;
  out.candidates_considered = union_keys.size();
  out.config.variables = variables;
  for (const auto& v : variables) {
    std::vector<Survivor> mine;
    for (const auto& s : survivors)
      if (s.key.first == v.name) mine.push_back(s);
    std::sort(mine.begin(), mine.end(), [](const Survivor& a, const Survivor& b) {
      if (a.total != b.total) return a.total > b.total;
      return a.key.second < b.key.second;
    });
    for (const auto& s : mine)
      out.config.features.push_back({feature_name(v.name, s.key.second), v.name, MatchKind::kLiteral, s.key.second});
    out.config.features.push_back({default_feature_name(v.name), v.name, MatchKind::kDefault, ""});
  }
  if (survivors.empty())
    out.warnings.push_back("every candidate was removed by the variance filter; config holds defaults only");
  out.config.validate();
  return out;
}

MergeOutcome learn_config(const CorpusManifest& manifest, const std::vector<VariableDef>& variables,
                          const LearningParams& params, std::size_t workers,
                          std::vector<ChunkLearning>* per_chunk) {
  params.validate();
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < manifest.chunks.size(); ++i)
    if (!manifest.chunks[i].unbinned()) ids.push_back(i);
  std::vector<ChunkLearning> parts(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t k) {
    parts[k] = learn_chunk_stats(manifest, ids[k], variables, params.presence_threshold);
  });
  // Chunks sharing a bin are folded together so the variance is per bin.
  std::vector<ChunkLearning> bins;
  for (auto& p : parts) {
    if (!bins.empty() && bins.back().label == p.label) {
      auto& b = bins.back();
      for (const auto& [k, n] : p.occurrences) b.occurrences[k] += n;
      // Presence is re-derived only approximately for multi-file bins: a
      // candidate in either file stays a candidate.
      for (auto& c : p.candidates)
        if (std::none_of(b.candidates.begin(), b.candidates.end(), [&](const CandidateFeature& x) {
              return x.variable == c.variable && x.value == c.value;
            }))
          b.candidates.push_back(c);
      b.entry_count += p.entry_count;
    } else {
      bins.push_back(std::move(p));
    }
  }
  auto out = merge_learned(bins, variables, params);
  if (per_chunk) *per_chunk = std::move(bins);
  return out;
}

void emit_config(const ParserConfig& config, const std::string& path) { save_config(config, path); }

}  // namespace mbda

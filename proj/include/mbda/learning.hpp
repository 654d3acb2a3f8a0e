#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mbda/faac.hpp"

namespace mbda {

struct CandidateFeature {
  std::string variable;
  std::string value;
  double presence = 0;  // fraction of the chunk's entries containing the value

  bool operator==(const CandidateFeature&) const = default;
};

struct LearningParams {
  double presence_threshold = 0.05;
  // Candidate count variance must reach this fraction of the variance of
  // entries per bin.
  double variance_ratio_threshold = 1e-4;

  void validate() const;
};

// Everything the merge step needs from one chunk: its candidates plus the
// occurrence count of every (variable, value) seen, so that any candidate
// found elsewhere has an exact count here too.
struct ChunkLearning {
  std::string label;
  std::uint64_t entry_count = 0;
  std::vector<CandidateFeature> candidates;
  std::map<std::pair<std::string, std::string>, std::int64_t> occurrences;
};

nlohmann::json to_json(const ChunkLearning& c);
ChunkLearning chunk_learning_from_json(const nlohmann::json& j);

// Candidates sorted by descending presence (ties by variable, value).
std::vector<CandidateFeature> learn_chunk(const std::vector<LogEntry>& entries,
                                          const std::vector<VariableDef>& variables,
                                          double presence_threshold);

ChunkLearning learn_chunk_stats(const CorpusManifest& manifest, std::size_t chunk_id,
                                const std::vector<VariableDef>& variables, double presence_threshold);

struct MergeOutcome {
  ParserConfig config;
  std::vector<std::string> warnings;
  std::size_t candidates_considered = 0;
};

MergeOutcome merge_learned(const std::vector<ChunkLearning>& chunks,
                           const std::vector<VariableDef>& variables, const LearningParams& params);

// Per-chunk learning on a worker pool followed by the merge.
MergeOutcome learn_config(const CorpusManifest& manifest, const std::vector<VariableDef>& variables,
                          const LearningParams& params, std::size_t workers,
                          std::vector<ChunkLearning>* per_chunk = nullptr);

// Writes the YAML config; literal values are stored verbatim, never as
// regexes.
void emit_config(const ParserConfig& config, const std::string& path);

std::string feature_name(const std::string& variable, const std::string& value);
std::string default_feature_name(const std::string& variable);

}  // namespace mbda

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mbda/corpus.hpp"

namespace mbda {

// A regex-captured entity class, e.g. the trap type OID or the AP name.
struct VariableDef {
  std::string name;
  std::string pattern;  // exactly one capture group

  bool operator==(const VariableDef&) const = default;
};

enum class MatchKind { kLiteral, kRegex, kDefault };

// A specific value (or value pattern) of a variable. Default features count
// occurrences whose captured value matched no other feature of the variable.
struct FeatureDef {
  std::string name;
  std::string variable;
  MatchKind kind = MatchKind::kLiteral;
  std::string value;  // literal text or regex; empty for defaults

  bool is_default() const { return kind == MatchKind::kDefault; }
  bool operator==(const FeatureDef&) const = default;
};

struct ParserConfig {
  static constexpr std::string_view kEntryCount = "entry_count";
  static constexpr std::string_view kTripletCount = "triplet_count";

  std::vector<VariableDef> variables;
  std::vector<FeatureDef> features;
  std::string triplet_separator = "#";
  std::int64_t bin_width = kSecondsPerDay;

  // Feature names in declaration order, then the two meta-counters.
  std::vector<std::string> column_names() const;
  const FeatureDef* find_feature(std::string_view name) const;
  const VariableDef* find_variable(std::string_view name) const;
  // Throws ConfigError on the first violated invariant.
  void validate() const;

  bool operator==(const ParserConfig&) const = default;
};

ParserConfig parse_config_yaml(const std::string& text);
std::string config_to_yaml(const ParserConfig& config);
// Only the `variables:` section, for learning; features are ignored.
std::vector<VariableDef> parse_variables_yaml(const std::string& text);
ParserConfig load_config(const std::string& path);
void save_config(const ParserConfig& config, const std::string& path);

// Generic trap-style variables matching the `<name> = <type>: <value>`
// triplets produced by the synthetic generator.
std::vector<VariableDef> default_trap_variables();

struct FeatureVector {
  std::string label;
  std::vector<std::string> columns;
  std::vector<std::int64_t> counts;

  std::int64_t count(std::string_view column) const;
};

// N time bins by M count features, row-major.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> columns);

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& columns() const { return columns_; }

  std::int64_t at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  std::span<const std::int64_t> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }
  std::ptrdiff_t column_index(std::string_view name) const;
  std::ptrdiff_t row_index(std::string_view label) const;

  // Labels must be appended in strictly increasing order.
  void append_row(std::string label, std::span<const std::int64_t> counts);
  FeatureMatrix without_rows(const std::set<std::string>& labels) const;
  // Copy with every row of `replacement` substituted for the same-labelled
  // row here. Columns must match and every label must already exist.
  FeatureMatrix with_rows_replaced(const FeatureMatrix& replacement) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> columns_;
  std::vector<std::int64_t> values_;
};

// Compiled form of a ParserConfig; immutable and safe to share across
// worker threads.
class Matcher {
 public:
  explicit Matcher(const ParserConfig& config);
  ~Matcher();
  Matcher(Matcher&&) noexcept;
  Matcher& operator=(Matcher&&) noexcept;

  const ParserConfig& config() const;
  std::size_t column_count() const;

  // Adds this entry's contributions to `counts` (column order).
  void count_entry(std::string_view entry, std::span<std::int64_t> counts) const;
  // Sets hits[f] for every feature f matched at least once by the entry.
  void mark_features(std::string_view entry, std::vector<char>& hits) const;
  // Captured values of one variable within an entry, in order of
  // occurrence. With `distinct`, repeats are dropped.
  void capture_values(std::string_view entry, std::size_t variable,
                      std::vector<std::string>& out, bool distinct = true) const;
  std::ptrdiff_t variable_index(std::string_view name) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

FeatureVector parse_chunk(const std::vector<LogEntry>& entries, const ParserConfig& config,
                          std::string label = {});

// Entries to skip while parsing, keyed by source path.
using EntryExclusions = std::map<std::string, std::set<std::uint64_t>>;

struct ChunkStatus {
  std::size_t chunk_id = 0;
  std::string label;
  std::string path;
  bool ok = true;
  std::string message;
  std::uint64_t entries = 0;
  double wall_ms = 0;
};

struct RunReport {
  std::vector<ChunkStatus> chunks;
  std::vector<std::string> missing_bins;
  double wall_ms = 0;
};

nlohmann::json to_json(const RunReport& report);

struct ParseOptions {
  std::size_t workers = 1;
  const EntryExclusions* exclusions = nullptr;
  // When non-empty only these bins are parsed.
  std::set<std::string> only_bins;
  Progress* progress = nullptr;
};

struct ParseResult {
  FeatureMatrix matrix;
  RunReport report;
};

// One row per time bin (chunks sharing a bin are summed). Bins with a
// failed chunk are left out of the matrix and listed in the report.
ParseResult parse_corpus(const CorpusManifest& manifest, const ParserConfig& config,
                         const ParseOptions& options = {});

// Column-wise concatenation. With more than one input, columns are renamed
// "<source>/<feature>".
FeatureMatrix fuse(const std::vector<std::pair<std::string, FeatureMatrix>>& sources);

std::string matrix_to_csv(const FeatureMatrix& m);
FeatureMatrix matrix_from_csv(const std::string& text, const std::string& origin = "<csv>");
void write_matrix(const FeatureMatrix& m, const std::string& path);
FeatureMatrix read_matrix(const std::string& path);

}  // namespace mbda

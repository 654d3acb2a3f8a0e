#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mbda/deparse.hpp"
#include "mbda/diagnosis.hpp"
#include "mbda/learning.hpp"
#include "mbda/pca.hpp"

namespace mbda {

struct ComponentPolicy {
  enum class Kind { kFixed, kCkf };
  Kind kind = Kind::kCkf;
  int fixed = 2;
  double tolerance = 0.01;
  int max_components = 20;
};

struct WorkspaceSettings {
  Preprocessing preprocess = Preprocessing::kMeanCenter;
  ComponentPolicy policy;
  double alpha = 0.99;
  std::vector<std::string> actor_variables{"ap", "sta", "user"};
  std::string station_variable = "sta";
  std::string ap_variable = "ap";
};

nlohmann::json to_json(const WorkspaceSettings& s);
WorkspaceSettings settings_from_json(const nlohmann::json& j);

enum class ExtractionKind { kLogWise, kObservationWise };

struct ExtractionRecord {
  ExtractionKind kind = ExtractionKind::kObservationWise;
  std::string case_id;
  std::vector<std::string> bins;
  std::uint64_t removed_entries = 0;  // log-wise
  std::uint64_t removed_rows = 0;     // observation-wise
  int from_iteration = 0;
  int to_iteration = 0;
  std::string report;  // log-wise: de-parse report, relative to the workspace root

  bool operator==(const ExtractionRecord&) const = default;
};

nlohmann::json to_json(const ExtractionRecord& r);
ExtractionRecord extraction_from_json(const nlohmann::json& j);

enum class CaseStatus { kDetected, kDiagnosed, kDeparsed, kExtracted };
std::string to_string(CaseStatus s);

struct CaseState {
  AnomalyCase anomaly;
  CaseStatus status = CaseStatus::kDetected;
  int iteration = 0;
  nlohmann::json statistics = nlohmann::json::array();
  std::string report;
};

// Exclusive advisory lock on <root>/lock, released on destruction. Throws
// LockError if another holder exists.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const std::string& root);
  ~WorkspaceLock();
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  int fd_ = -1;
  std::string key_;
};

// On-disk layout:
//   workspace.json  manifest.json  config.yaml  registry.jsonl
//   iterations/NNN/{matrix.csv, model.json, curves.json, msnm.json, detection.json}
//   reports/<case>.json
class Workspace {
 public:
  static Workspace create(const std::string& root, const WorkspaceSettings& settings = {});
  static Workspace open(const std::string& root);
  static Workspace open_or_create(const std::string& root);

  const std::string& root() const { return root_; }
  const WorkspaceSettings& settings() const { return settings_; }
  void save_settings(const WorkspaceSettings& s);

  std::string path(const std::string& relative) const;
  bool has(const std::string& relative) const;

  CorpusManifest manifest() const;
  void save_manifest(const CorpusManifest& m) const;
  ParserConfig config() const;
  void save_config(const ParserConfig& c) const;

  // Highest iteration holding a matrix, or -1.
  int iteration() const;
  std::string iteration_dir(int k) const;
  FeatureMatrix matrix(int k) const;
  void write_iteration_matrix(int k, const FeatureMatrix& m) const;
  PcaModel model(int k) const;
  bool has_model(int k) const;

  std::vector<nlohmann::json> events() const;
  void append_event(nlohmann::json event) const;
  std::map<std::string, CaseState> cases() const;
  std::vector<ExtractionRecord> extractions() const;

 private:
  std::string root_;
  WorkspaceSettings settings_;
};

// --- pipeline steps ---------------------------------------------------------

ParseResult parse_initial(const Workspace& ws, std::size_t workers, bool force = false);

struct FitOutcome {
  PcaModel model;
  CurveReport curves;
  int chosen_components = 0;
};

FitOutcome fit_iteration(const Workspace& ws, const ComponentPolicy& policy, Preprocessing mode);

struct DetectionReport {
  int iteration = 0;
  MsnmResult msnm;
  std::vector<std::string> labels;
  std::vector<std::string> flagged;
  std::vector<std::string> new_cases;
};

nlohmann::json to_json(const DetectionReport& r);

// Statistics and limits for the current iteration's model; bins above
// either limit are grouped into runs of consecutive bins and appended to
// the registry as detected cases.
DetectionReport detect(const Workspace& ws, double alpha);

DetectionReport iterate(const Workspace& ws, double alpha, const ComponentPolicy& policy, Preprocessing mode);

// Plot payloads for the current iteration: kind in {model, scores,
// loadings, biplot, msnm, curves}.
nlohmann::json plot_payload(const Workspace& ws, const std::string& kind, int pc_x = 1, int pc_y = 2);

// Cases with their status plus the extraction history.
nlohmann::json registry_payload(const Workspace& ws);

struct DiagnoseOptions {
  TopRule rule = TopRule::top_k(3);
  // Components used for the reconstruction; 0 means the model's count.
  int components = 0;
};

// Top features by `rule` among the config's non-default features; the
// meta counters and catch-all defaults cannot key a de-parse.
std::vector<std::string> case_features(const OmedaResult& result, const TopRule& rule, const ParserConfig& config);

OmedaResult diagnose_selection(const Workspace& ws, const GroupSelection& selection, int components = 0);
// Contrasts the case's bins with all other bins and records the selected
// features in the registry.
OmedaResult diagnose_case(const Workspace& ws, const std::string& case_id, const DiagnoseOptions& options);

// Registers a case created by hand (e.g. from an interactive selection).
AnomalyCase create_case(const Workspace& ws, std::vector<std::string> bins, std::vector<std::string> features,
                        std::string notes = {});

DeparseReport deparse_case(const Workspace& ws, const std::string& case_id, std::size_t workers,
                           Progress* progress = nullptr);

struct UpdateOutcome {
  FeatureMatrix matrix;
  ExtractionRecord record;
};

UpdateOutcome update_observationwise(const Workspace& ws, const std::set<std::string>& bins,
                                     const std::string& case_id = {});
UpdateOutcome update_logwise(const Workspace& ws, const std::string& case_id, std::size_t workers,
                             Progress* progress = nullptr);

// Rebuilds every iteration's matrix from the manifest, config and the
// recorded extractions.
std::vector<FeatureMatrix> replay_matrices(const Workspace& ws, std::size_t workers);

}  // namespace mbda

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mbda/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mbda {

// --- settings ----------------------------------------------------------------

json to_json(const WorkspaceSettings& s) {
  return {{"preprocess", to_string(s.preprocess)},
          {"policy",
           {{"kind", s.policy.kind == ComponentPolicy::Kind::kFixed ? "fixed" : "ckf"},
            {"fixed", s.policy.fixed},
            {"tolerance", s.policy.tolerance},
            {"max_components", s.policy.max_components}}},
          {"alpha", s.alpha},
          {"actor_variables", s.actor_variables},
          {"station_variable", s.station_variable},
          {"ap_variable", s.ap_variable}};
}

WorkspaceSettings settings_from_json(const json& j) {
  WorkspaceSettings s;
  if (j.contains("preprocess")) s.preprocess = preprocessing_from_string(j.at("preprocess").get<std::string>());
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    s.policy.kind = p.value("kind", std::string("ckf")) == "fixed" ? ComponentPolicy::Kind::kFixed
                                                                   : ComponentPolicy::Kind::kCkf;
    s.policy.fixed = p.value("fixed", s.policy.fixed);
    s.policy.tolerance = p.value("tolerance", s.policy.tolerance);
    s.policy.max_components = p.value("max_components", s.policy.max_components);
  }
  s.alpha = j.value("alpha", s.alpha);
  s.actor_variables = j.value("actor_variables", s.actor_variables);
  s.station_variable = j.value("station_variable", s.station_variable);
  s.ap_variable = j.value("ap_variable", s.ap_variable);
  return s;
}

json to_json(const ExtractionRecord& r) {
  return {{"kind", r.kind == ExtractionKind::kLogWise ? "log-wise" : "observation-wise"},
          {"case", r.case_id},
          {"bins", r.bins},
          {"removed_entries", r.removed_entries},
          {"removed_rows", r.removed_rows},
          {"from_iteration", r.from_iteration},
          {"to_iteration", r.to_iteration},
          {"report", r.report}};
}

ExtractionRecord extraction_from_json(const json& j) {
  ExtractionRecord r;
  r.kind = j.at("kind").get<std::string>() == "log-wise" ? ExtractionKind::kLogWise : ExtractionKind::kObservationWise;
  j.at("case").get_to(r.case_id);
  j.at("bins").get_to(r.bins);
  j.at("removed_entries").get_to(r.removed_entries);
  j.at("removed_rows").get_to(r.removed_rows);
  j.at("from_iteration").get_to(r.from_iteration);
  j.at("to_iteration").get_to(r.to_iteration);
  j.at("report").get_to(r.report);
  return r;
}

std::string to_string(CaseStatus s) {
  switch (s) {
    case CaseStatus::kDetected: return "detected";
    case CaseStatus::kDiagnosed: return "diagnosed";
    case CaseStatus::kDeparsed: return "deparsed";
    case CaseStatus::kExtracted: return "extracted";
  }
  return "?";
}

// --- lock --------------------------------------------------------------------

namespace {

struct HeldLock {
  std::thread::id owner;
  int depth = 0;
  int fd = -1;
};

std::mutex g_lock_mutex;
std::map<std::string, HeldLock> g_held;

std::string now_iso() {
  return format_iso8601(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
}

}  // namespace

// Re-entrant for the owning thread, exclusive against other threads and
// other processes (flock).
WorkspaceLock::WorkspaceLock(const std::string& root) {
  const std::string key = fs::absolute(root).lexically_normal().string();
  std::lock_guard guard(g_lock_mutex);
  auto it = g_held.find(key);
  if (it != g_held.end()) {
    if (it->second.owner != std::this_thread::get_id()) throw LockError("workspace is locked by another operation");
    ++it->second.depth;
    fd_ = -2;
    key_ = key;
    return;
  }
  const std::string file = key + "/lock";
  int fd = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open lock file " + file);
  if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd);
    throw LockError("workspace is locked by another process");
  }
  g_held[key] = {std::this_thread::get_id(), 1, fd};
  fd_ = fd;
  key_ = key;
}

WorkspaceLock::~WorkspaceLock() {
  std::lock_guard guard(g_lock_mutex);
  if (fd_ == -2) {
    --g_held.at(key_).depth;
    return;
  }
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
    g_held.erase(key_);
  }
}

// --- workspace ---------------------------------------------------------------

namespace {

std::string three_digits(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", k);
  return buf;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace

Workspace Workspace::create(const std::string& root, const WorkspaceSettings& settings) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error("cannot create workspace " + root + ": " + ec.message());
  Workspace ws;
  ws.root_ = fs::absolute(root).lexically_normal().string();
  ws.save_settings(settings);
  return ws;
}

Workspace Workspace::open(const std::string& root) {
  Workspace ws;
  ws.root_ = fs::absolute(root).lexically_normal().string();
  if (!fs::exists(ws.path("workspace.json"))) throw ConfigError("no workspace at " + ws.root_);
  ws.settings_ = settings_from_json(read_json(ws.path("workspace.json")));
  return ws;
}

Workspace Workspace::open_or_create(const std::string& root) {
  if (fs::exists(fs::path(root) / "workspace.json")) return open(root);
  return create(root);
}

void Workspace::save_settings(const WorkspaceSettings& s) {
  settings_ = s;
  write_file(path("workspace.json"), to_json(s).dump(2) + "\n");
}

std::string Workspace::path(const std::string& relative) const { return (fs::path(root_) / relative).string(); }
bool Workspace::has(const std::string& relative) const { return fs::exists(path(relative)); }

CorpusManifest Workspace::manifest() const {
  if (!has("manifest.json")) throw ConfigError("workspace has no manifest; run scan first");
  return load_manifest(path("manifest.json"));
}

void Workspace::save_manifest(const CorpusManifest& m) const { mbda::save_manifest(m, path("manifest.json")); }

ParserConfig Workspace::config() const {
  if (!has("config.yaml")) throw ConfigError("workspace has no parser config; run learn first");
  return load_config(path("config.yaml"));
}

void Workspace::save_config(const ParserConfig& c) const { mbda::save_config(c, path("config.yaml")); }

std::string Workspace::iteration_dir(int k) const { return path("iterations/" + three_digits(k)); }

int Workspace::iteration() const {
  int k = -1;
  while (fs::exists(fs::path(iteration_dir(k + 1)) / "matrix.csv")) ++k;
  return k;
}

FeatureMatrix Workspace::matrix(int k) const {
  const std::string p = iteration_dir(k) + "/matrix.csv";
  if (!fs::exists(p)) throw DataError("iteration " + std::to_string(k) + " has no matrix");
  return read_matrix(p);
}

void Workspace::write_iteration_matrix(int k, const FeatureMatrix& m) const {
  fs::create_directories(iteration_dir(k));
  write_matrix(m, iteration_dir(k) + "/matrix.csv");
}

bool Workspace::has_model(int k) const { return fs::exists(iteration_dir(k) + "/model.json"); }

PcaModel Workspace::model(int k) const {
  if (!has_model(k)) throw DataError("iteration " + std::to_string(k) + " has no model; run fit first");
  return model_from_json(read_json(iteration_dir(k) + "/model.json"));
}

std::vector<json> Workspace::events() const {
  std::vector<json> out;
  if (!has("registry.jsonl")) return out;
  std::istringstream in(read_file(path("registry.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError("registry.jsonl:" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void Workspace::append_event(json event) const {
  if (!event.contains("time")) event["time"] = now_iso();
  std::ofstream out(path("registry.jsonl"), std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to registry");
  out << event.dump() << "\n";
}

std::map<std::string, CaseState> Workspace::cases() const {
  std::map<std::string, CaseState> out;
  for (const auto& e : events()) {
    const std::string kind = e.at("event").get<std::string>();
    if (kind == "detected" || kind == "case") {
      CaseState st;
      st.anomaly = case_from_json(e.at("case"));
      st.iteration = e.value("iteration", 0);
      st.status = st.anomaly.features.empty() ? CaseStatus::kDetected : CaseStatus::kDiagnosed;
      if (e.contains("statistics")) st.statistics = e.at("statistics");
      out[st.anomaly.id] = st;
      continue;
    }
    const std::string id = e.value("case_id", std::string{});
    auto it = out.find(id);
    if (it == out.end()) continue;
    auto& st = it->second;
    if (kind == "diagnosed") {
      st.anomaly.features = e.at("features").get<std::vector<std::string>>();
      st.status = std::max(st.status, CaseStatus::kDiagnosed);
    } else if (kind == "deparsed") {
      st.report = e.at("report").get<std::string>();
      st.status = std::max(st.status, CaseStatus::kDeparsed);
    } else if (kind == "extracted") {
      st.status = CaseStatus::kExtracted;
    }
  }
  return out;
}

std::vector<ExtractionRecord> Workspace::extractions() const {
  std::vector<ExtractionRecord> out;
  for (const auto& e : events())
    if (e.at("event") == "extracted") out.push_back(extraction_from_json(e.at("record")));
  return out;
}

// --- pipeline ----------------------------------------------------------------

ParseResult parse_initial(const Workspace& ws, std::size_t workers, bool force) {
  WorkspaceLock lock(ws.root());
  if (ws.iteration() >= 0 && !force)
    throw ConfigError("workspace already holds parsed iterations (use --force to start over)");
  const auto manifest = ws.manifest();
  const auto config = ws.config();
  ParseOptions options;
  options.workers = workers;
  auto result = parse_corpus(manifest, config, options);
  if (force) {
    std::error_code ec;
    fs::remove_all(ws.path("iterations"), ec);
    fs::remove_all(ws.path("reports"), ec);
    fs::remove(ws.path("registry.jsonl"), ec);
  }
  ws.write_iteration_matrix(0, result.matrix);
  write_file(ws.iteration_dir(0) + "/run_report.json", to_json(result.report).dump(2) + "\n");
  return result;
}

namespace {

struct Calibration {
  FeatureMatrix matrix;
  Eigen::MatrixXd xcs;
};

Calibration calibration_for(const Workspace& ws, int k, const PcaModel& model) {
  Calibration c{ws.matrix(k), {}};
  c.xcs = model.preprocess.apply(c.matrix);
  return c;
}

int current_iteration(const Workspace& ws) {
  int k = ws.iteration();
  if (k < 0) throw ConfigError("workspace has no feature matrix; run parse first");
  return k;
}

}  // namespace

FitOutcome fit_iteration(const Workspace& ws, const ComponentPolicy& policy, Preprocessing mode) {
  WorkspaceLock lock(ws.root());
  const int k = current_iteration(ws);
  const auto matrix = ws.matrix(k);
  auto pre = preprocess(matrix, mode);
  const auto n = static_cast<std::size_t>(pre.data.rows());
  const auto m = static_cast<std::size_t>(pre.data.cols());
  if (m < 2) throw DataError("fewer than two non-constant features; nothing to model");

  FitOutcome out;
  const int folds = std::max(2, default_k_folds(m));
  const int curve_max = std::min(policy.max_components, max_curve_components(n, m, folds));
  out.curves = selection_curves(pre.data, std::max(curve_max, 0), folds);
  if (policy.kind == ComponentPolicy::Kind::kFixed)
    out.chosen_components = policy.fixed;
  else
    out.chosen_components = curve_max >= 1 ? choose_components(out.curves, policy.tolerance) : 1;
  out.model = fit_pca(pre.data, out.chosen_components, pre.spec);

  write_file(ws.iteration_dir(k) + "/model.json", to_json(out.model).dump(2) + "\n");
  write_file(ws.iteration_dir(k) + "/curves.json", curves_payload(out.curves).dump(2) + "\n");
  return out;
}

json to_json(const DetectionReport& r) {
  json flagged = json::array();
  for (const auto& label : r.flagged) {
    auto i = static_cast<Eigen::Index>(std::find(r.labels.begin(), r.labels.end(), label) - r.labels.begin());
    json by = json::array();
    if (r.msnm.stats.d(i) > r.msnm.limits.ucl_d) by.push_back("D");
    if (r.msnm.limits.ucl_q && r.msnm.stats.q(i) > *r.msnm.limits.ucl_q) by.push_back("Q");
    flagged.push_back({{"label", label}, {"d", r.msnm.stats.d(i)}, {"q", r.msnm.stats.q(i)}, {"by", by}});
  }
  return {{"iteration", r.iteration},
          {"alpha", r.msnm.limits.alpha},
          {"ucl_d", r.msnm.limits.ucl_d},
          {"ucl_q", r.msnm.limits.ucl_q ? json(*r.msnm.limits.ucl_q) : json(nullptr)},
          {"flagged", flagged},
          {"new_cases", r.new_cases}};
}

DetectionReport detect(const Workspace& ws, double alpha) {
  WorkspaceLock lock(ws.root());
  const int k = current_iteration(ws);
  const auto model = ws.model(k);
  const auto cal = calibration_for(ws, k, model);

  DetectionReport rep;
  rep.iteration = k;
  rep.labels = cal.matrix.labels();
  rep.msnm.stats = statistics(model, cal.xcs);
  rep.msnm.limits = control_limits(model, alpha, LimitKind::kCalibration);

  std::vector<bool> hit(rep.labels.size(), false);
  for (std::size_t i = 0; i < rep.labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    hit[i] = rep.msnm.stats.d(r) > rep.msnm.limits.ucl_d ||
             (rep.msnm.limits.ucl_q && rep.msnm.stats.q(r) > *rep.msnm.limits.ucl_q);
    if (hit[i]) rep.flagged.push_back(rep.labels[i]);
  }

  auto existing = ws.cases();
  int next_id = 1;
  for (const auto& [id, st] : existing)
    if (st.iteration == k && id.rfind("it", 0) == 0) ++next_id;
  for (std::size_t i = 0; i < hit.size();) {
    if (!hit[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < hit.size() && hit[j]) ++j;
    AnomalyCase c;
    c.bins.assign(rep.labels.begin() + static_cast<std::ptrdiff_t>(i), rep.labels.begin() + static_cast<std::ptrdiff_t>(j));
    bool duplicate = std::any_of(existing.begin(), existing.end(), [&](const auto& kv) {
      return kv.second.iteration == k && kv.second.anomaly.bins == c.bins;
    });
    if (!duplicate) {
      char id[32];
      std::snprintf(id, sizeof id, "it%d-%02d", k, next_id++);
      c.id = id;
      c.created_at = now_iso();
      json stats = json::array();
      for (std::size_t r = i; r < j; ++r)
        stats.push_back({{"label", rep.labels[r]},
                         {"d", rep.msnm.stats.d(static_cast<Eigen::Index>(r))},
                         {"q", rep.msnm.stats.q(static_cast<Eigen::Index>(r))}});
      ws.append_event({{"event", "detected"}, {"iteration", k}, {"case", to_json(c)}, {"statistics", stats}});
      rep.new_cases.push_back(c.id);
    }
    i = j;
  }

  write_file(ws.iteration_dir(k) + "/msnm.json", msnm_payload(rep.msnm, rep.labels).dump(2) + "\n");
  write_file(ws.iteration_dir(k) + "/detection.json", to_json(rep).dump(2) + "\n");
  return rep;
}

DetectionReport iterate(const Workspace& ws, double alpha, const ComponentPolicy& policy, Preprocessing mode) {
  WorkspaceLock lock(ws.root());
  fit_iteration(ws, policy, mode);
  return detect(ws, alpha);
}

json plot_payload(const Workspace& ws, const std::string& kind, int pc_x, int pc_y) {
  const int k = current_iteration(ws);
  if (kind == "msnm" || kind == "curves") {
    const std::string p = ws.iteration_dir(k) + "/" + kind + ".json";
    if (!fs::exists(p)) throw DataError(kind + " payload missing for iteration " + std::to_string(k) +
                                        (kind == "msnm" ? "; run detect" : "; run fit"));
    return read_json(p);
  }
  const auto model = ws.model(k);
  if (kind == "model") {
    auto j = to_json(model);
    j["iteration"] = k;
    return j;
  }
  if (kind == "loadings") return loadings_payload(model, pc_x, pc_y);
  const auto cal = calibration_for(ws, k, model);
  if (kind == "scores") return scores_payload(model, cal.xcs, cal.matrix.labels(), pc_x, pc_y);
  if (kind == "biplot") return biplot_payload(model, cal.xcs, cal.matrix.labels(), pc_x, pc_y);
  throw ConfigError("unknown plot kind '" + kind + "'");
}

json registry_payload(const Workspace& ws) {
  json cases = json::array();
  for (const auto& [id, st] : ws.cases()) {
    auto c = to_json(st.anomaly);
    c["status"] = to_string(st.status);
    c["iteration"] = st.iteration;
    c["statistics"] = st.statistics;
    c["report"] = st.report.empty() ? json(nullptr) : json(st.report);
    cases.push_back(c);
  }
  json extractions = json::array();
  for (const auto& r : ws.extractions()) extractions.push_back(to_json(r));
  return {{"iteration", ws.iteration()}, {"cases", cases}, {"extractions", extractions}};
}

namespace {

PcaModel model_with_components(const PcaModel& model, const Eigen::MatrixXd& xcs, int components) {
  if (components <= 0 || components == model.components) return model;
  return fit_pca(xcs, components, model.preprocess);
}

}  // namespace

std::vector<std::string> case_features(const OmedaResult& result, const TopRule& rule, const ParserConfig& config) {
  OmedaResult eligible;
  for (std::size_t i = 0; i < result.features.size(); ++i) {
    const auto* f = config.find_feature(result.features[i]);
    if (!f || f->is_default()) continue;
    eligible.features.push_back(result.features[i]);
    eligible.bars.push_back(result.bars[i]);
  }
  return top_features(eligible, rule);
}

OmedaResult diagnose_selection(const Workspace& ws, const GroupSelection& selection, int components) {
  const int k = current_iteration(ws);
  const auto base = ws.model(k);
  const auto cal = calibration_for(ws, k, base);
  const auto model = model_with_components(base, cal.xcs, components);
  const auto w = build_dummy(selection, cal.matrix.labels());
  return omeda(model, cal.xcs, w);
}

OmedaResult diagnose_case(const Workspace& ws, const std::string& case_id, const DiagnoseOptions& options) {
  WorkspaceLock lock(ws.root());
  auto cases = ws.cases();
  auto it = cases.find(case_id);
  if (it == cases.end()) throw ConfigError("unknown case " + case_id);
  if (it->second.status == CaseStatus::kExtracted) throw ConfigError("case " + case_id + " was already extracted");
  GroupSelection sel;
  sel.group1 = it->second.anomaly.bins;
  sel.rest_as_group2 = true;
  auto result = diagnose_selection(ws, sel, options.components);

  const auto features = case_features(result, options.rule, ws.config());
  json bars = json::object();
  for (std::size_t i = 0; i < result.features.size(); ++i) bars[result.features[i]] = result.bars[i];
  ws.append_event({{"event", "diagnosed"},
                   {"case_id", case_id},
                   {"iteration", current_iteration(ws)},
                   {"features", features},
                   {"bars", bars}});
  return result;
}

AnomalyCase create_case(const Workspace& ws, std::vector<std::string> bins, std::vector<std::string> features,
                        std::string notes) {
  WorkspaceLock lock(ws.root());
  const int k = current_iteration(ws);
  const auto matrix = ws.matrix(k);
  AnomalyCase c;
  std::sort(bins.begin(), bins.end());
  c.bins = std::move(bins);
  c.features = std::move(features);
  c.notes = std::move(notes);
  c.created_at = now_iso();
  validate_case(c, ws.config(), matrix.labels());
  const auto cases = ws.cases();
  int n = 1;
  char id[32];
  do std::snprintf(id, sizeof id, "case-%03d", n++);
  while (cases.count(id));
  c.id = id;
  ws.append_event({{"event", "case"}, {"iteration", k}, {"case", to_json(c)}});
  return c;
}

DeparseReport deparse_case(const Workspace& ws, const std::string& case_id, std::size_t workers, Progress* progress) {
  WorkspaceLock lock(ws.root());
  auto cases = ws.cases();
  auto it = cases.find(case_id);
  if (it == cases.end()) throw ConfigError("unknown case " + case_id);
  if (it->second.anomaly.features.empty()) throw ConfigError("case " + case_id + " has no features; diagnose it first");
  DeparseOptions options;
  options.workers = workers;
  options.actor_variables = ws.settings().actor_variables;
  options.progress = progress;
  auto report = deparse(ws.manifest(), it->second.anomaly, ws.config(), options);
  fs::create_directories(ws.path("reports"));
  const std::string rel = "reports/" + case_id + ".json";
  save_report(report, ws.path(rel));
  ws.append_event({{"event", "deparsed"},
                   {"case_id", case_id},
                   {"report", rel},
                   {"matched", report.matched_entries},
                   {"total", report.total_entries}});
  return report;
}

namespace {

void check_case_open(const std::map<std::string, CaseState>& cases, const std::string& case_id) {
  if (case_id.empty()) return;
  auto it = cases.find(case_id);
  if (it == cases.end()) throw ConfigError("unknown case " + case_id);
  if (it->second.status == CaseStatus::kExtracted) throw ConfigError("case " + case_id + " was already extracted");
}

// Exclusions of every log-wise record in `records`, plus `extra`.
EntryExclusions cumulative_exclusions(const Workspace& ws, const std::vector<ExtractionRecord>& records) {
  EntryExclusions out;
  for (const auto& r : records) {
    if (r.kind != ExtractionKind::kLogWise) continue;
    for (auto& [path, offsets] : exclusions_of(load_report(ws.path(r.report))))
      out[path].insert(offsets.begin(), offsets.end());
  }
  return out;
}

FeatureMatrix apply_logwise(const FeatureMatrix& current, const CorpusManifest& manifest, const ParserConfig& config,
                            const std::vector<std::string>& bins, const EntryExclusions& exclusions,
                            std::size_t workers, Progress* progress) {
  ParseOptions options;
  options.workers = workers;
  options.exclusions = &exclusions;
  options.only_bins = std::set<std::string>(bins.begin(), bins.end());
  options.progress = progress;
  auto reparsed = parse_corpus(manifest, config, options);
  if (!reparsed.report.missing_bins.empty())
    throw DataError("re-parse failed for bin " + reparsed.report.missing_bins.front());
  return current.with_rows_replaced(reparsed.matrix);
}

}  // namespace

UpdateOutcome update_observationwise(const Workspace& ws, const std::set<std::string>& bins, const std::string& case_id) {
  WorkspaceLock lock(ws.root());
  check_case_open(ws.cases(), case_id);
  const int k = current_iteration(ws);
  const auto current = ws.matrix(k);
  if (bins.empty()) throw DataError("no bins selected for extraction");
  for (const auto& b : bins)
    if (current.row_index(b) < 0) throw DataError("bin " + b + " is not in iteration " + std::to_string(k));
  if (bins.size() >= current.rows()) throw DataError("extraction would remove every observation");

  UpdateOutcome out{current.without_rows(bins), {}};
  out.record.kind = ExtractionKind::kObservationWise;
  out.record.case_id = case_id;
  out.record.bins.assign(bins.begin(), bins.end());
  out.record.removed_rows = current.rows() - out.matrix.rows();
  out.record.from_iteration = k;
  out.record.to_iteration = k + 1;
  ws.write_iteration_matrix(k + 1, out.matrix);
  json ev = {{"event", "extracted"}, {"record", to_json(out.record)}};
  if (!case_id.empty()) ev["case_id"] = case_id;
  ws.append_event(ev);
  return out;
}

UpdateOutcome update_logwise(const Workspace& ws, const std::string& case_id, std::size_t workers, Progress* progress) {
  WorkspaceLock lock(ws.root());
  const auto cases = ws.cases();
  check_case_open(cases, case_id);
  const auto& st = cases.at(case_id);
  if (st.report.empty()) throw ConfigError("case " + case_id + " has no de-parse report; run deparse first");
  const auto report = load_report(ws.path(st.report));
  const auto manifest = ws.manifest();
  if (report.manifest_fingerprint != manifest.fingerprint())
    throw DataError("de-parse report for " + case_id + " is stale: the manifest changed");
  const int k = current_iteration(ws);
  const auto current = ws.matrix(k);
  for (const auto& b : report.bins)
    if (current.row_index(b) < 0) throw DataError("bin " + b + " is not in iteration " + std::to_string(k));

  UpdateOutcome out;
  out.record.kind = ExtractionKind::kLogWise;
  out.record.case_id = case_id;
  out.record.bins = report.bins;
  out.record.removed_entries = report.matched_entries;
  out.record.from_iteration = k;
  out.record.to_iteration = k + 1;
  out.record.report = st.report;

  auto records = ws.extractions();
  records.push_back(out.record);
  const auto exclusions = cumulative_exclusions(ws, records);
  out.matrix = apply_logwise(current, manifest, ws.config(), report.bins, exclusions, workers, progress);
  ws.write_iteration_matrix(k + 1, out.matrix);
  ws.append_event({{"event", "extracted"}, {"case_id", case_id}, {"record", to_json(out.record)}});
  return out;
}

std::vector<FeatureMatrix> replay_matrices(const Workspace& ws, std::size_t workers) {
  const auto manifest = ws.manifest();
  const auto config = ws.config();
  ParseOptions options;
  options.workers = workers;
  std::vector<FeatureMatrix> out{parse_corpus(manifest, config, options).matrix};
  std::vector<ExtractionRecord> applied;
  for (const auto& r : ws.extractions()) {
    applied.push_back(r);
    if (r.kind == ExtractionKind::kObservationWise) {
      out.push_back(out.back().without_rows(std::set<std::string>(r.bins.begin(), r.bins.end())));
    } else {
      out.push_back(apply_logwise(out.back(), manifest, config, r.bins, cumulative_exclusions(ws, applied), workers,
                                  nullptr));
    }
  }
  return out;
}

}  // namespace mbda

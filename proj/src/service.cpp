#include "mbda/service.hpp"

// Eigen first: httplib pulls in <resolv.h>, whose `res` macro breaks Eigen.
#include "mbda/workspace.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

using nlohmann::json;

namespace mbda {

std::string to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "?";
}

namespace {

struct BadRequest : Error {
  std::string field;
  BadRequest(std::string f, const std::string& msg) : Error(msg), field(std::move(f)) {}
};

struct NotFound : Error {
  using Error::Error;
};

ServiceResponse json_response(int status, const json& body) { return {status, body.dump(2) + "\n"}; }

ServiceResponse error_response(int status, const std::string& message, const std::string& field = {}) {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_response(status, body);
}

using Query = std::map<std::string, std::string>;

void split_target(const std::string& target, std::string& path, Query& query) {
  auto q = target.find('?');
  path = httplib::detail::decode_url(target.substr(0, q), false);
  if (q == std::string::npos) return;
  std::string rest = target.substr(q + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    auto amp = rest.find('&', pos);
    if (amp == std::string::npos) amp = rest.size();
    std::string kv = rest.substr(pos, amp - pos);
    if (!kv.empty()) {
      auto eq = kv.find('=');
      std::string k = kv.substr(0, eq);
      std::string v = eq == std::string::npos ? "" : kv.substr(eq + 1);
      query[httplib::detail::decode_url(k, true)] = httplib::detail::decode_url(v, true);
    }
    pos = amp + 1;
  }
}

long long int_param(const Query& q, const std::string& name, long long fallback) {
  auto it = q.find(name);
  if (it == q.end()) return fallback;
  try {
    std::size_t used = 0;
    long long v = std::stoll(it->second, &used);
    if (used != it->second.size() || v < 0) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw BadRequest(name, "'" + name + "' must be a non-negative integer");
  }
}

std::pair<int, int> pcs_param(const Query& q) {
  auto it = q.find("pcs");
  if (it == q.end()) return {1, 2};
  auto comma = it->second.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("");
    int a = std::stoi(it->second.substr(0, comma));
    int b = std::stoi(it->second.substr(comma + 1));
    if (a < 1 || b < 1) throw std::invalid_argument("");
    return {a, b};
  } catch (const std::exception&) {
    throw BadRequest("pcs", "'pcs' must be two 1-based component indices, e.g. pcs=1,2");
  }
}

json parse_body(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw BadRequest("body", "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw BadRequest("body", std::string("malformed JSON: ") + e.what());
  }
}

std::vector<std::string> string_list(const json& body, const std::string& field, bool required) {
  if (!body.contains(field)) {
    if (required) throw BadRequest(field, "'" + field + "' is required");
    return {};
  }
  const auto& v = body.at(field);
  if (!v.is_array()) throw BadRequest(field, "'" + field + "' must be an array of bin labels");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw BadRequest(field, "'" + field + "' must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string string_field(const json& body, const std::string& field) {
  if (!body.contains(field)) throw BadRequest(field, "'" + field + "' is required");
  if (!body.at(field).is_string()) throw BadRequest(field, "'" + field + "' must be a string");
  return body.at(field).get<std::string>();
}

}  // namespace

struct Service::Impl {
  struct Job {
    std::string id;
    std::string kind;
    JobState state = JobState::kQueued;
    Progress progress;
    double reported = 0;
    std::string result;
    std::string error;
    std::function<std::string(Progress*)> run;
  };

  std::string root;
  ServiceOptions options;
  httplib::Server server;

  std::mutex mu;
  std::condition_variable cv;
  std::condition_variable idle_cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::deque<std::shared_ptr<Job>> queue;
  std::shared_ptr<Job> current;
  int next_job = 1;
  bool stopping = false;
  std::thread worker;

  Impl(std::string r, ServiceOptions o) : root(std::move(r)), options(std::move(o)) {
    Workspace::open(root);
    worker = std::thread([this] { run_jobs(); });
  }

  ~Impl() {
    {
      std::lock_guard g(mu);
      stopping = true;
    }
    cv.notify_all();
    worker.join();
  }

  void run_jobs() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = queue.front();
        queue.pop_front();
        job->state = JobState::kRunning;
        current = job;
      }
      std::string result, error;
      bool ok = true;
      try {
        result = job->run(&job->progress);
      } catch (const std::exception& e) {
        ok = false;
        error = e.what();
      }
      {
        std::lock_guard g(mu);
        job->result = result;
        job->error = error;
        job->state = ok ? JobState::kDone : JobState::kFailed;
        current.reset();
      }
      idle_cv.notify_all();
    }
  }

  bool busy() {
    std::lock_guard g(mu);
    return current || !queue.empty();
  }

  std::string submit(const std::string& kind, std::function<std::string(Progress*)> run) {
    auto job = std::make_shared<Job>();
    job->kind = kind;
    job->run = std::move(run);
    {
      std::lock_guard g(mu);
      job->id = "job-" + std::to_string(next_job++);
      jobs[job->id] = job;
      queue.push_back(job);
    }
    cv.notify_all();
    return job->id;
  }

  json job_json(const std::string& id) {
    std::lock_guard g(mu);
    auto it = jobs.find(id);
    if (it == jobs.end()) throw NotFound("unknown job " + id);
    auto& job = *it->second;
    double p = 0;
    if (job.state == JobState::kDone) {
      p = 1;
    } else if (job.state == JobState::kRunning && job.progress.total.load() > 0) {
      p = job.progress.fraction();
    }
    job.reported = std::max(job.reported, p);
    json j = {{"id", job.id}, {"kind", job.kind}, {"state", to_string(job.state)}, {"progress", job.reported}};
    j["result"] = job.result.empty() ? json(nullptr) : json(job.result);
    if (!job.error.empty()) j["error"] = job.error;
    return j;
  }

  ServiceResponse get(const std::string& path, const Query& q) {
    const auto ws = Workspace::open(root);
    if (path == "/openapi") return {200, openapi_document()};
    if (path == "/model" || path == "/curves" || path == "/msnm") return json_response(200, plot_payload(ws, path.substr(1)));
    if (path == "/scores" || path == "/loadings" || path == "/biplot") {
      auto [a, b] = pcs_param(q);
      return json_response(200, plot_payload(ws, path.substr(1), a, b));
    }
    if (path == "/registry") return json_response(200, registry_payload(ws));
    if (path == "/graph") return graph(ws, q);
    if (path == "/report") {
      auto it = q.find("case");
      if (it == q.end()) throw BadRequest("case", "'case' is required");
      auto cases = ws.cases();
      auto c = cases.find(it->second);
      if (c == cases.end() || c->second.report.empty()) throw NotFound("no de-parse report for case " + it->second);
      return {200, read_file(ws.path(c->second.report))};
    }
    if (path.rfind("/jobs/", 0) == 0) return json_response(200, job_json(path.substr(6)));
    throw NotFound("no route GET " + path);
  }

  ServiceResponse graph(const Workspace& ws, const Query& q) {
    std::vector<std::string> bins;
    if (auto it = q.find("case"); it != q.end()) {
      auto cases = ws.cases();
      auto c = cases.find(it->second);
      if (c == cases.end()) throw BadRequest("case", "unknown case " + it->second);
      bins = c->second.anomaly.bins;
    } else if (auto b = q.find("bins"); b != q.end()) {
      std::string s = b->second;
      for (std::size_t pos = 0; pos <= s.size();) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        if (comma > pos) bins.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
      }
    } else {
      throw BadRequest("case", "'case' or 'bins' is required");
    }
    const auto node_min = static_cast<std::uint64_t>(int_param(q, "node_min", 0));
    const auto edge_min = static_cast<std::uint64_t>(int_param(q, "edge_min", 0));
    GraphFormat format = GraphFormat::kJson;
    if (auto f = q.find("format"); f != q.end()) {
      try {
        format = graph_format_from_string(f->second);
      } catch (const Error& e) {
        throw BadRequest("format", e.what());
      }
    }
    const auto& s = ws.settings();
    auto g = filter_graph(build_graph_window(ws.manifest(), bins, ws.config(), s.station_variable, s.ap_variable,
                                             options.workers),
                          node_min, edge_min);
    switch (format) {
      case GraphFormat::kGexf: return {200, graph_to_gexf(g), "application/xml"};
      case GraphFormat::kCsv: return {200, graph_to_csv(g), "text/csv"};
      case GraphFormat::kJson: break;
    }
    return json_response(200, graph_to_json(g));
  }

  ServiceResponse post(const std::string& path, const std::string& raw) {
    const auto body = parse_body(raw);
    const auto ws = Workspace::open(root);
    if (path == "/diagnose") {
      GroupSelection sel;
      sel.group1 = string_list(body, "group1", true);
      if (sel.group1.empty()) throw BadRequest("group1", "'group1' must not be empty");
      sel.group2 = string_list(body, "group2", false);
      sel.rest_as_group2 = !body.contains("group2");
      const auto labels = ws.matrix(ws.iteration()).labels();
      auto check_known = [&](const std::vector<std::string>& group, const std::string& field) {
        for (const auto& l : group)
          if (!std::binary_search(labels.begin(), labels.end(), l))
            throw BadRequest(field, "unknown bin '" + l + "' in " + field);
      };
      check_known(sel.group1, "group1");
      check_known(sel.group2, "group2");
      for (const auto& l : sel.group2)
        if (std::find(sel.group1.begin(), sel.group1.end(), l) != sel.group1.end())
          throw BadRequest("group2", "groups overlap on bin '" + l + "'");
      int components = 0;
      if (body.contains("components")) {
        if (!body.at("components").is_number_integer() || body.at("components").get<int>() < 0)
          throw BadRequest("components", "'components' must be a non-negative integer");
        components = body.at("components").get<int>();
      }
      auto result = diagnose_selection(ws, sel, components);
      auto j = to_json(result);
      j["top"] = case_features(result, TopRule::top_k(3), ws.config());
      return json_response(200, j);
    }
    if (path == "/cases") {
      auto bins = string_list(body, "bins", true);
      auto features = string_list(body, "features", true);
      std::string notes = body.value("notes", std::string{});
      try {
        return json_response(201, to_json(create_case(ws, bins, features, notes)));
      } catch (const ConfigError& e) {
        throw BadRequest("features", e.what());
      } catch (const DataError& e) {
        throw BadRequest("bins", e.what());
      }
    }
    if (path == "/iterate") {
      double alpha = body.value("alpha", ws.settings().alpha);
      if (!(alpha > 0 && alpha < 1)) throw BadRequest("alpha", "'alpha' must lie in (0, 1)");
      if (busy()) return error_response(409, "a job is running on this workspace");
      return json_response(200, to_json(iterate(ws, alpha, ws.settings().policy, ws.settings().preprocess)));
    }
    if (path == "/deparse") {
      const auto id = string_field(body, "case");
      auto cases = ws.cases();
      auto it = cases.find(id);
      if (it == cases.end()) throw BadRequest("case", "unknown case " + id);
      if (it->second.anomaly.features.empty()) throw BadRequest("case", "case " + id + " has no features");
      const auto r = root;
      const auto workers = options.workers;
      auto job = submit("deparse", [r, id, workers](Progress* p) {
        deparse_case(Workspace::open(r), id, workers, p);
        return "reports/" + id + ".json";
      });
      return json_response(202, {{"job", job}});
    }
    if (path == "/update") {
      const auto kind = string_field(body, "kind");
      if (kind != "observation-wise" && kind != "log-wise")
        throw BadRequest("kind", "'kind' must be 'observation-wise' or 'log-wise'");
      if (busy()) return error_response(409, "a job is running on this workspace");
      { WorkspaceLock probe(root); }  // contention with other processes -> 409
      if (kind == "observation-wise") {
        std::string case_id = body.contains("case") ? string_field(body, "case") : std::string{};
        std::vector<std::string> bins = string_list(body, "bins", false);
        if (bins.empty() && !case_id.empty()) {
          auto cases = ws.cases();
          auto it = cases.find(case_id);
          if (it == cases.end()) throw BadRequest("case", "unknown case " + case_id);
          bins = it->second.anomaly.bins;
        }
        if (bins.empty()) throw BadRequest("bins", "'bins' or 'case' is required");
        auto out = update_observationwise(ws, std::set<std::string>(bins.begin(), bins.end()), case_id);
        return json_response(200, {{"record", to_json(out.record)}, {"iteration", out.record.to_iteration}});
      }
      const auto id = string_field(body, "case");
      auto cases = ws.cases();
      if (!cases.count(id)) throw BadRequest("case", "unknown case " + id);
      const auto r = root;
      const auto workers = options.workers;
      auto job = submit("reparse", [r, id, workers](Progress* p) {
        auto out = update_logwise(Workspace::open(r), id, workers, p);
        char dir[32];
        std::snprintf(dir, sizeof dir, "iterations/%03d", out.record.to_iteration);
        return std::string(dir);
      });
      return json_response(202, {{"job", job}});
    }
    throw NotFound("no route POST " + path);
  }
};

Service::Service(std::string workspace_root, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(workspace_root), std::move(options))) {
  impl_->server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    auto out = handle(req.method, req.target, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
    if (!impl_->options.cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", impl_->options.cors_origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    }
    return httplib::Server::HandlerResponse::Handled;
  });
}

Service::~Service() { stop(); }

ServiceResponse Service::handle(const std::string& method, const std::string& target, const std::string& body) {
  std::string path;
  Query query;
  try {
    split_target(target, path, query);
    if (method == "OPTIONS") return {204, "", "text/plain"};
    if (method == "GET") return impl_->get(path, query);
    if (method == "POST") return impl_->post(path, body);
    return error_response(405, "method not allowed");
  } catch (const BadRequest& e) {
    return error_response(400, e.what(), e.field);
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const LockError& e) {
    return error_response(409, e.what());
  } catch (const ConfigError& e) {
    return error_response(400, e.what());
  } catch (const DataError& e) {
    return error_response(422, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

int Service::bind() {
  int port = impl_->options.port == 0 ? impl_->server.bind_to_any_port(impl_->options.host)
                                      : (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)
                                             ? impl_->options.port
                                             : -1);
  if (port < 0) throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_idle() {
  std::unique_lock lk(impl_->mu);
  impl_->idle_cv.wait(lk, [&] { return !impl_->current && impl_->queue.empty(); });
}

const std::string& openapi_document() {
  static const std::string doc = R"({
  "openapi": "3.0.3",
  "info": {"title": "mbda explorer service", "version": "1.0.0"},
  "paths": {
    "/model": {"get": {"summary": "Current iteration's PCA model", "responses": {"200": {"description": "model JSON"}}}},
    "/curves": {"get": {"summary": "Residual-variance and ckf curves", "responses": {"200": {"description": "curves payload"}}}},
    "/scores": {"get": {"summary": "Score scatter payload", "parameters": [{"name": "pcs", "in": "query", "schema": {"type": "string", "example": "1,2"}}], "responses": {"200": {"description": "scores payload"}}}},
    "/loadings": {"get": {"summary": "Loading scatter payload", "parameters": [{"name": "pcs", "in": "query", "schema": {"type": "string"}}], "responses": {"200": {"description": "loadings payload"}}}},
    "/biplot": {"get": {"summary": "Biplot payload", "parameters": [{"name": "pcs", "in": "query", "schema": {"type": "string"}}], "responses": {"200": {"description": "biplot payload"}}}},
    "/msnm": {"get": {"summary": "D and Q statistics with control limits", "responses": {"200": {"description": "msnm payload"}}}},
    "/registry": {"get": {"summary": "Anomaly cases and extraction history", "responses": {"200": {"description": "registry"}}}},
    "/graph": {"get": {"summary": "Station/AP connection graph for a case or bins", "parameters": [
      {"name": "case", "in": "query", "schema": {"type": "string"}},
      {"name": "bins", "in": "query", "schema": {"type": "string"}},
      {"name": "node_min", "in": "query", "schema": {"type": "integer", "minimum": 0}},
      {"name": "edge_min", "in": "query", "schema": {"type": "integer", "minimum": 0}},
      {"name": "format", "in": "query", "schema": {"type": "string", "enum": ["json", "gexf", "csv"]}}],
      "responses": {"200": {"description": "graph"}, "400": {"description": "bad parameter"}}}},
    "/report": {"get": {"summary": "Stored de-parse report of a case", "parameters": [{"name": "case", "in": "query", "required": true, "schema": {"type": "string"}}], "responses": {"200": {"description": "report"}, "404": {"description": "no report"}}}},
    "/jobs/{id}": {"get": {"summary": "Job state", "parameters": [{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}], "responses": {"200": {"description": "job"}, "404": {"description": "unknown job"}}}},
    "/diagnose": {"post": {"summary": "oMEDA contrast of two groups of bins", "requestBody": {"content": {"application/json": {"schema": {"type": "object", "required": ["group1"], "properties": {"group1": {"type": "array", "items": {"type": "string"}}, "group2": {"type": "array", "items": {"type": "string"}}, "components": {"type": "integer"}}}}}}, "responses": {"200": {"description": "bars"}, "400": {"description": "invalid selection"}}}},
    "/cases": {"post": {"summary": "Register a case", "requestBody": {"content": {"application/json": {"schema": {"type": "object", "required": ["bins", "features"], "properties": {"bins": {"type": "array", "items": {"type": "string"}}, "features": {"type": "array", "items": {"type": "string"}}, "notes": {"type": "string"}}}}}}, "responses": {"201": {"description": "case"}}}},
    "/deparse": {"post": {"summary": "Start a de-parse job", "requestBody": {"content": {"application/json": {"schema": {"type": "object", "required": ["case"], "properties": {"case": {"type": "string"}}}}}}, "responses": {"202": {"description": "job id"}}}},
    "/update": {"post": {"summary": "Extract a case from the model", "requestBody": {"content": {"application/json": {"schema": {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string", "enum": ["observation-wise", "log-wise"]}, "case": {"type": "string"}, "bins": {"type": "array", "items": {"type": "string"}}}}}}}, "responses": {"200": {"description": "observation-wise record"}, "202": {"description": "log-wise job id"}, "409": {"description": "workspace busy"}}}},
    "/iterate": {"post": {"summary": "Fit and detect on the current iteration", "requestBody": {"content": {"application/json": {"schema": {"type": "object", "properties": {"alpha": {"type": "number"}}}}}}, "responses": {"200": {"description": "detection report"}}}}
  }
}
)";
  return doc;
}

}  // namespace mbda

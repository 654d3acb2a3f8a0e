#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "json.hpp"

namespace mbda {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t workers = 1;
  std::string cors_origin;  // empty: no CORS headers
};

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

enum class JobState { kQueued, kRunning, kDone, kFailed };
std::string to_string(JobState s);

// HTTP facade over one workspace. Reads re-open the workspace per request;
// de-parse and log-wise updates run on a single background job thread.
class Service {
 public:
  Service(std::string workspace_root, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Routing without sockets; `target` is path plus optional query string.
  ServiceResponse handle(const std::string& method, const std::string& target, const std::string& body = {});

  // Binds (port 0 picks a free port) and returns the bound port; throws on failure.
  int bind();
  // Blocks until stop().
  void listen();
  void stop();

  // Waits for the job queue to drain (tests).
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Static OpenAPI document served at /openapi.
const std::string& openapi_document();

}  // namespace mbda

/**
 * Copyright 2026 The boxald Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"

#include "boxald/experiment.hpp"
#include "boxald/rundir.hpp"

namespace httplib {
class Server;
}

namespace boxald {

// Seconds on an arbitrary monotonic axis.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

struct ServiceOptions {
  double lease_seconds = 600.0;
  std::string session_token;  // required in X-Session-Token when non-empty
  std::optional<std::uint64_t> seed;  // default: first configured seed
};

// Transport-independent response: HTTP status plus a JSON body.
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Annotation session over one seed of a run directory. Every handler runs
// under one mutex, so commits and cycle advances are serialized.
class AnnotationSession {
 public:
  AnnotationSession(RunDirectory run, ServiceOptions options, Clock clock = steady_clock_seconds());

  ApiResponse health() const;
  ApiResponse session() const;
  ApiResponse next_queries(std::size_t n, const std::string& annotator);
  ApiResponse annotate(const nlohmann::json& request);
  ApiResponse progress() const;
  ApiResponse advance_cycle(const nlohmann::json& request);
  ApiResponse image(ImageId id) const;

  bool authorized(const std::string& token) const;
  // Persists the current state, open cycle included.
  void save() const;
  const std::string& id() const { return session_id_; }
  const RunDirectory& run() const { return run_; }

  // Copy of the experiment state, for tests.
  ExperimentState state() const;

 private:
  struct Lease {
    std::size_t query = 0;
    std::string annotator;
    double expires_at = 0.0;
  };

  void expire_leases();
  nlohmann::json progress_json() const;
  std::string new_token();

  RunDirectory run_;
  DirectoryLock lock_;
  ServiceOptions options_;
  Clock clock_;
  std::string session_id_;
  std::uint64_t token_counter_ = 0;
  mutable std::mutex mu_;
  std::unique_ptr<Experiment> exp_;
  std::map<std::string, Lease> leases_;  // token -> lease
  std::map<std::size_t, std::string> leased_;  // query -> token
  std::set<std::string> consumed_;
  std::set<std::string> expired_;
};

// Routes the session under /api on `server`.
void mount_routes(httplib::Server& server, AnnotationSession& session);

nlohmann::json error_body(const std::string& code, const std::string& message);

}  // namespace boxald

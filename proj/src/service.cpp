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
#include "boxald/service.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "httplib.h"

#include "boxald/errors.hpp"
#include "boxald/rng.hpp"

namespace boxald {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json box_array(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

ApiResponse fail(int status, const std::string& code, const std::string& message) {
  return {status, error_body(code, message)};
}

json ledger_entry_json(const LedgerEntry& e) {
  return {{"cycle", e.cycle},
          {"boxes_charged", e.boxes_charged},
          {"background_charged", e.background_charged},
          {"images_touched", e.images_touched()}};
}

}  // namespace

Clock steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

json error_body(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

AnnotationSession::AnnotationSession(RunDirectory run, ServiceOptions options, Clock clock)
    : run_(std::move(run)), lock_(run_.path()), options_(std::move(options)), clock_(std::move(clock)) {
  const RunConfig& cfg = run_.config();
  if (cfg.effective_protocol() != Protocol::kBox) {
    throw ConfigError("service: only the box protocol can be annotated interactively");
  }
  if (!(options_.lease_seconds > 0.0)) throw ConfigError("service: lease duration must be positive");
  const std::uint64_t seed = options_.seed ? *options_.seed : cfg.seeds.at(0);
  std::random_device rd;
  session_id_ = hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  exp_ = std::make_unique<Experiment>(open_experiment(run_, seed));
  if (!exp_->cycle_open() && !exp_->finished()) exp_->begin_cycle();
}

bool AnnotationSession::authorized(const std::string& token) const {
  return options_.session_token.empty() || token == options_.session_token;
}

std::string AnnotationSession::new_token() {
  return session_id_ + "-" + hex64(derive_seed(0x6C65617365, {token_counter_++}));
}

void AnnotationSession::expire_leases() {
  const double now = clock_();
  for (auto it = leases_.begin(); it != leases_.end();) {
    if (it->second.expires_at <= now) {
      leased_.erase(it->second.query);
      expired_.insert(it->first);
      it = leases_.erase(it);
    } else {
      ++it;
    }
  }
}

ExperimentState AnnotationSession::state() const {
  std::lock_guard<std::mutex> g(mu_);
  return exp_->state();
}

void AnnotationSession::save() const {
  std::lock_guard<std::mutex> g(mu_);
  run_.save(*exp_);
}

ApiResponse AnnotationSession::health() const { return {200, {{"status", "ok"}, {"session_id", session_id_}}}; }

ApiResponse AnnotationSession::session() const {
  std::lock_guard<std::mutex> g(mu_);
  const RunConfig& cfg = exp_->config();
  json classes = json::array();
  for (const auto& c : exp_->dataset().categories()) classes.push_back({{"class_id", c.class_id}, {"name", c.name}});
  return {200,
          {{"session_id", session_id_},
           {"run_dir", run_.path().string()},
           {"config_digest", run_.digest()},
           {"seed", exp_->state().seed},
           {"strategy", to_string(cfg.strategy)},
           {"classes", classes},
           {"cycle", exp_->cycle()},
           {"n_cycles", cfg.n_cycles},
           {"per_cycle_budget", cfg.per_cycle_budget},
           {"lease_seconds", options_.lease_seconds}}};
}

ApiResponse AnnotationSession::next_queries(std::size_t n, const std::string& annotator) {
  std::lock_guard<std::mutex> g(mu_);
  expire_leases();
  json prompts = json::array();
  const bool complete = !exp_->cycle_open() || exp_->cycle_complete();
  if (!complete) {
    const OpenCycle& oc = *exp_->state().open;
    const double now = clock_();
    for (std::size_t q = 0; q < oc.batch.queries.size() && prompts.size() < n; ++q) {
      if (oc.answered[q] || leased_.count(q) != 0) continue;
      const std::string token = new_token();
      leases_[token] = {q, annotator, now + options_.lease_seconds};
      leased_[q] = token;
      const Query& query = oc.batch.queries[q];
      const ImageRecord& img = exp_->dataset().at(query.image_id);
      prompts.push_back({{"lease_token", token},
                         {"query_index", q},
                         {"image_id", query.image_id},
                         {"file_name", img.file_name},
                         {"width", img.width},
                         {"height", img.height},
                         {"box", box_array(query.box)},
                         {"class_id", query.class_id},
                         {"score", query.score},
                         {"expires_in", options_.lease_seconds}});
    }
  }
  return {200, {{"cycle", exp_->cycle()}, {"cycle_complete", complete}, {"prompts", prompts}}};
}

ApiResponse AnnotationSession::annotate(const json& request) {
  std::lock_guard<std::mutex> g(mu_);
  if (!request.is_object() || !request.contains("lease_token") || !request["lease_token"].is_string()) {
    return fail(400, "bad-request", "lease_token is required");
  }
  const std::string token = request["lease_token"].get<std::string>();
  if (consumed_.count(token) != 0) return fail(409, "conflict", "lease " + token + " was already answered");
  expire_leases();
  if (expired_.count(token) != 0) return fail(410, "expired-lease", "lease " + token + " has expired");
  const auto it = leases_.find(token);
  if (it == leases_.end()) return fail(404, "unknown-lease", "no lease " + token);

  const std::string decision = request.value("decision", "");
  if (decision != "accept" && decision != "reject") {
    return fail(400, "bad-request", "decision must be \"accept\" or \"reject\"");
  }
  const std::size_t qi = it->second.query;
  const Query& query = exp_->state().open->batch.queries.at(qi);
  HumanDecision hd;
  hd.accept = decision == "accept";
  hd.annotator = it->second.annotator.empty() ? "human" : it->second.annotator;
  hd.box = query.box;
  hd.class_id = query.class_id;
  try {
    if (request.contains("box")) {
      const auto v = request["box"].get<std::vector<double>>();
      if (v.size() != 4) return fail(400, "bad-request", "box must be [x1, y1, x2, y2]");
      hd.box = {v[0], v[1], v[2], v[3]};
    }
    if (request.contains("class_id")) hd.class_id = request["class_id"].get<int>();
  } catch (const json::exception&) {
    return fail(400, "bad-request", "box or class_id has the wrong type");
  }

  const LedgerEntry before = exp_->state().ledger.entries.back();
  SubmitStatus status;
  try {
    status = exp_->submit_human(qi, hd);
  } catch (const ConfigError& e) {
    return fail(400, "bad-request", e.what());
  }
  switch (status) {
    case SubmitStatus::kApplied:
      break;
    case SubmitStatus::kBudgetExhausted: {
      ApiResponse r = fail(409, "budget-exhausted", "the cycle budget is spent");
      r.body["cycle_complete"] = true;
      return r;
    }
    case SubmitStatus::kAlreadyAnswered:
      return fail(409, "conflict", "query already answered");
    case SubmitStatus::kNoOpenCycle:
    case SubmitStatus::kUnknownQuery:
      return fail(409, "conflict", "query is not part of the open cycle");
  }
  leased_.erase(qi);
  leases_.erase(token);
  consumed_.insert(token);
  const LedgerEntry& after = exp_->state().ledger.entries.back();
  const bool revealed = exp_->state().open->revealed_by_query[qi];
  return {200,
          {{"result", revealed ? "matched" : "background"},
           {"ledger_delta",
            {{"boxes", after.boxes_charged - before.boxes_charged},
             {"background", after.background_charged - before.background_charged}}},
           {"cumulative_boxes", exp_->state().ledger.cumulative_boxes},
           {"cycle_spend", after.spend()},
           {"cycle_complete", exp_->cycle_complete()}}};
}

json AnnotationSession::progress_json() const {
  const ExperimentState& st = exp_->state();
  const RunConfig& cfg = exp_->config();
  json ledger = json::array();
  for (const auto& e : st.ledger.entries) ledger.push_back(ledger_entry_json(e));
  std::size_t total = 0, answered = 0;
  if (st.open) {
    total = st.open->batch.queries.size();
    for (bool a : st.open->answered) answered += a ? 1 : 0;
  }
  const double now = clock_();
  std::size_t leased = 0;
  for (const auto& [token, lease] : leases_) leased += lease.expires_at > now ? 1 : 0;
  return {{"cycle", exp_->cycle()},
          {"n_cycles", cfg.n_cycles},
          {"cycle_open", exp_->cycle_open()},
          {"cycle_complete", exp_->cycle_complete()},
          {"finished", exp_->finished()},
          {"budget",
           {{"per_cycle", cfg.per_cycle_budget},
            {"spent", st.ledger.entries.empty() ? 0.0 : st.ledger.entries.back().spend()},
            {"cumulative_boxes", st.ledger.cumulative_boxes},
            {"init_overshoot", st.ledger.init_overshoot}}},
          {"pools",
           {{"labeled", st.pool.fully_labeled.size()},
            {"sparse", st.pool.sparse.size()},
            {"unlabeled", st.pool.unlabeled.size()}}},
          {"queries", {{"total", total}, {"answered", answered}, {"leased", leased}}},
          {"ledger", ledger}};
}

ApiResponse AnnotationSession::progress() const {
  std::lock_guard<std::mutex> g(mu_);
  return {200, progress_json()};
}

ApiResponse AnnotationSession::advance_cycle(const json& request) {
  std::lock_guard<std::mutex> g(mu_);
  const bool force = request.is_object() && request.value("force", false);
  if (exp_->finished()) return fail(409, "finished", "all cycles are complete");
  if (!exp_->cycle_complete() && !force) {
    return fail(409, "cycle-incomplete", "budget not spent and queries remain; pass force to close the cycle");
  }
  const CycleReport report = exp_->end_cycle(true);
  run_.save(*exp_);
  run_.save_scores(*exp_);
  run_.write_results();
  for (const auto& [token, lease] : leases_) expired_.insert(token);
  leases_.clear();
  leased_.clear();
  std::size_t batch = 0;
  if (!exp_->finished()) batch = exp_->begin_cycle().batch.queries.size();
  return {200,
          {{"closed_cycle", report.cycle},
           {"cycle", exp_->cycle()},
           {"batch_size", batch},
           {"finished", exp_->finished()},
           {"report",
            {{"cumulative_boxes", report.cumulative_boxes},
             {"cycle_boxes", report.cycle_boxes},
             {"map50", report.map50},
             {"map5095", report.map5095}}}}};
}

ApiResponse AnnotationSession::image(ImageId id) const {
  std::lock_guard<std::mutex> g(mu_);
  if (!exp_->dataset().contains(id)) return fail(404, "not-found", "no image " + std::to_string(id));
  const ImageRecord& img = exp_->dataset().at(id);
  const PoolState& pool = exp_->state().pool;
  json revealed = json::array();
  for (std::size_t b : revealed_boxes(pool, img)) {
    revealed.push_back({{"box_id", b}, {"box", box_array(img.boxes[b].label.box)}, {"class_id", img.boxes[b].label.class_id}});
  }
  json background = json::array();
  if (const auto it = pool.verified_background.find(id); it != pool.verified_background.end()) {
    for (const auto& b : it->second) background.push_back(box_array(b));
  }
  const char* state = pool.is_labeled(id) ? "labeled" : pool.is_sparse(id) ? "sparse" : "unlabeled";
  return {200,
          {{"image_id", id},
           {"file_name", img.file_name},
           {"width", img.width},
           {"height", img.height},
           {"pool", state},
           {"revealed", revealed},
           {"verified_background", background}}};
}

void mount_routes(httplib::Server& server, AnnotationSession& session) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto guarded = [&session, reply](auto handler) {
    return [&session, reply, handler](const httplib::Request& req, httplib::Response& res) {
      if (!session.authorized(req.get_header_value("X-Session-Token"))) {
        reply(res, {401, error_body("unauthorized", "missing or wrong session token")});
        return;
      }
      try {
        reply(res, handler(req));
      } catch (const std::exception& e) {
        reply(res, {500, error_body("internal", e.what())});
      }
    };
  };
  auto parse_body = [](const httplib::Request& req) -> std::optional<json> {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error&) {
      return std::nullopt;
    }
  };

  server.Get("/api/health", [&session, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, session.health());
  });
  server.Get("/api/session", guarded([&session](const httplib::Request&) { return session.session(); }));
  server.Get("/api/next-queries", guarded([&session](const httplib::Request& req) {
               std::size_t n = 1;
               if (req.has_param("n")) {
                 try {
                   n = static_cast<std::size_t>(std::stoul(req.get_param_value("n")));
                 } catch (const std::exception&) {
                   return ApiResponse{400, error_body("bad-request", "n must be a non-negative integer")};
                 }
               }
               const std::string annotator = req.has_param("annotator") ? req.get_param_value("annotator") : "human";
               return session.next_queries(n, annotator);
             }));
  server.Post("/api/annotation", guarded([&session, parse_body](const httplib::Request& req) {
                const auto body = parse_body(req);
                if (!body) return ApiResponse{400, error_body("bad-request", "body is not valid JSON")};
                return session.annotate(*body);
              }));
  server.Get("/api/progress", guarded([&session](const httplib::Request&) { return session.progress(); }));
  server.Post("/api/advance-cycle", guarded([&session, parse_body](const httplib::Request& req) {
                const auto body = parse_body(req);
                if (!body) return ApiResponse{400, error_body("bad-request", "body is not valid JSON")};
                return session.advance_cycle(*body);
              }));
  server.Get(R"(/api/images/(-?\d+))", guarded([&session](const httplib::Request& req) {
               return session.image(std::stoll(req.matches[1].str()));
             }));
  server.Get(R"(/api/images/(-?\d+)/pixels)", [&session, reply](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse meta = session.image(std::stoll(req.matches[1].str()));
    if (meta.status != 200) {
      reply(res, meta);
      return;
    }
    // Pixel files are optional; without one the console draws the boxes.
    std::filesystem::path file = meta.body["file_name"].get<std::string>();
    if (file.is_relative()) file = session.run().path() / file;
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      reply(res, {404, error_body("not-found", "no pixel file for this image")});
      return;
    }
    std::ostringstream bytes;
    bytes << in.rdbuf();
    const std::string ext = file.extension().string();
    res.set_content(bytes.str(), ext == ".png" ? "image/png" : ext == ".jpg" || ext == ".jpeg" ? "image/jpeg"
                                                                                                : "application/octet-stream");
  });
}

}  // namespace boxald

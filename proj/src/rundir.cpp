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
#include "boxald/rundir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "boxald/errors.hpp"

namespace fs = std::filesystem;

namespace boxald {

namespace {

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IntegrityError("run directory " + dir.string() + " is locked by another writer (" + path_.string() + ")");
    }
    throw Error("cannot lock " + dir.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

RunDirectory::RunDirectory(fs::path dir, RunConfig config)
    : dir_(std::move(dir)), config_(std::move(config)), digest_(config_digest(config_)) {}

RunDirectory RunDirectory::create(const fs::path& dir, const RunConfig& config) {
  validate(config);
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw ConfigError("run directory " + dir.string() + " already exists and is not empty");
  }
  fs::create_directories(dir);
  RunDirectory run(dir, config);
  write_atomically(run.dir_ / "config.json", to_json(config).dump(2) + "\n");
  return run;
}

RunDirectory RunDirectory::open(const fs::path& dir) {
  const fs::path cfg = dir / "config.json";
  if (!fs::exists(cfg)) throw ConfigError("not a run directory (no config.json): " + dir.string());
  return RunDirectory(dir, load_config(cfg.string()));
}

fs::path RunDirectory::seed_dir(std::uint64_t seed) const { return dir_ / ("seed-" + std::to_string(seed)); }

fs::path RunDirectory::snapshot_path(std::uint64_t seed, int cycle) const {
  return seed_dir(seed) / ("snapshot-cycle-" + std::to_string(cycle) + ".json");
}

fs::path RunDirectory::scores_path(std::uint64_t seed, int cycle) const {
  return seed_dir(seed) / ("scores-cycle-" + std::to_string(cycle) + ".tsv");
}

std::optional<int> RunDirectory::latest_snapshot(std::uint64_t seed) const {
  const fs::path sd = seed_dir(seed);
  if (!fs::exists(sd)) return std::nullopt;
  static const std::regex pattern(R"(snapshot-cycle-(\d+)\.json)");
  std::optional<int> best;
  for (const auto& entry : fs::directory_iterator(sd)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const int c = std::stoi(m[1].str());
      if (!best || c > *best) best = c;
    }
  }
  return best;
}

CycleSnapshot RunDirectory::load(std::uint64_t seed, int cycle) const {
  CycleSnapshot snap = load_snapshot(snapshot_path(seed, cycle).string());
  if (snap.config_digest != digest_) {
    throw SnapshotError("snapshot " + snapshot_path(seed, cycle).string() + " was written under config " +
                        snap.config_digest + ", run directory has " + digest_);
  }
  return snap;
}

void RunDirectory::save(const Experiment& exp) const {
  fs::create_directories(seed_dir(exp.state().seed));
  save_snapshot({digest_, exp.state()}, snapshot_path(exp.state().seed, exp.cycle()).string());
}

void RunDirectory::save_scores(const Experiment& exp) const {
  fs::create_directories(seed_dir(exp.state().seed));
  std::ostringstream out;
  out << "# config_digest=" << digest_ << "\n";
  export_score_distribution(out, exp.last_score_samples());
  write_atomically(scores_path(exp.state().seed, exp.cycle()), out.str());
}

void RunDirectory::write_results() const {
  std::vector<CycleReport> reports;
  for (std::uint64_t seed : config_.seeds) {
    const auto latest = latest_snapshot(seed);
    if (!latest) continue;
    const CycleSnapshot snap = load(seed, *latest);
    reports.insert(reports.end(), snap.state.reports.begin(), snap.state.reports.end());
  }
  std::ostringstream out;
  export_results(out, reports, digest_);
  write_atomically(results_path(), out.str());
}

Experiment open_experiment(const RunDirectory& run, std::uint64_t seed) {
  if (const auto latest = run.latest_snapshot(seed)) {
    return Experiment(run.config(), run.load(seed, *latest).state);
  }
  Experiment exp(run.config(), seed);
  run.save(exp);
  if (!fs::exists(run.dataset_path())) export_coco(exp.dataset(), run.dataset_path().string(), run.digest());
  return exp;
}

void advance_run(const RunDirectory& run, std::optional<std::size_t> until) {
  const std::size_t target = until ? std::min(*until, run.config().n_cycles) : run.config().n_cycles;
  for (std::uint64_t seed : run.config().seeds) {
    Experiment exp = open_experiment(run, seed);
    if (exp.cycle_open()) {
      exp.complete_cycle();
      run.save(exp);
      run.save_scores(exp);
    }
    while (static_cast<std::size_t>(exp.cycle()) < target) {
      exp.run_cycle();
      run.save(exp);
      run.save_scores(exp);
    }
  }
  run.write_results();
}

}  // namespace boxald

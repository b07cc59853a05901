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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "boxald/config.hpp"
#include "boxald/experiment.hpp"
#include "boxald/io.hpp"

namespace boxald {

// Exclusive writer lock on a run directory, held for the object's lifetime.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Layout:
//   config.json                       persisted RunConfig
//   dataset.coco.json                 training set (first seed when synthetic)
//   results.tsv                       results table
//   seed-<s>/snapshot-cycle-<t>.json  state after cycle t (0 = init)
//   seed-<s>/scores-cycle-<t>.tsv     acquisition score samples of cycle t
class RunDirectory {
 public:
  // Creates `dir`, which must not exist or be empty.
  static RunDirectory create(const std::filesystem::path& dir, const RunConfig& config);
  static RunDirectory open(const std::filesystem::path& dir);

  const std::filesystem::path& path() const { return dir_; }
  const RunConfig& config() const { return config_; }
  const std::string& digest() const { return digest_; }

  std::filesystem::path seed_dir(std::uint64_t seed) const;
  std::filesystem::path snapshot_path(std::uint64_t seed, int cycle) const;
  std::filesystem::path scores_path(std::uint64_t seed, int cycle) const;
  std::filesystem::path results_path() const { return dir_ / "results.tsv"; }
  std::filesystem::path dataset_path() const { return dir_ / "dataset.coco.json"; }

  // Highest cycle with a snapshot for `seed`, if any.
  std::optional<int> latest_snapshot(std::uint64_t seed) const;
  CycleSnapshot load(std::uint64_t seed, int cycle) const;

  void save(const Experiment& exp) const;
  void save_scores(const Experiment& exp) const;
  // Rewrites results.tsv from the reports of every seed's latest snapshot.
  void write_results() const;

 private:
  RunDirectory(std::filesystem::path dir, RunConfig config);

  std::filesystem::path dir_;
  RunConfig config_;
  std::string digest_;
};

// Restores the latest snapshot of `seed`, or starts fresh and saves cycle 0.
Experiment open_experiment(const RunDirectory& run, std::uint64_t seed);

// Runs every seed to `until` cycles (default: n_cycles), persisting each
// closed cycle, then rewrites the results table.
void advance_run(const RunDirectory& run, std::optional<std::size_t> until = std::nullopt);

}  // namespace boxald

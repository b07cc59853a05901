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
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "boxald/config.hpp"
#include "boxald/dataset.hpp"
#include "boxald/experiment.hpp"

namespace boxald {

inline constexpr const char* kSnapshotFormat = "boxald/1";

struct IngestResult {
  DatasetIndex index;
  std::size_t dropped_boxes = 0;  // zero-area annotations
};

// COCO-style detection annotations. Category ids are remapped to contiguous
// class ids in file order. Throws IngestError naming the offending record.
IngestResult ingest_coco(const std::string& path);
IngestResult ingest_coco_json(const nlohmann::json& j);

// Writes COCO annotations; synthetic difficulty travels as an extra
// "difficulty" field on each annotation. A non-empty digest goes to "info".
nlohmann::json export_coco_json(const DatasetIndex& dataset, const std::string& config_digest = "");
void export_coco(const DatasetIndex& dataset, const std::string& path, const std::string& config_digest = "");

// COCO detection results ([{image_id, category_id, bbox, score}]) grouped per
// image, using `dataset` for the category mapping.
std::vector<ImageDetections> ingest_coco_results(const std::string& path, const DatasetIndex& dataset);
std::vector<ImageDetections> ground_truth_detections(const DatasetIndex& dataset);

struct CycleSnapshot {
  std::string config_digest;
  ExperimentState state;
};

nlohmann::json snapshot_to_json(const CycleSnapshot& snapshot);
// Throws SnapshotError on a missing or mismatched format tag.
CycleSnapshot snapshot_from_json(const nlohmann::json& j);
void save_snapshot(const CycleSnapshot& snapshot, const std::string& path);
CycleSnapshot load_snapshot(const std::string& path);

// Results table: one "run" row per (seed, cycle) followed by one
// "aggregate" row per cycle with cross-seed means and standard deviations.
void export_results(std::ostream& out, const std::vector<CycleReport>& reports,
                    const std::string& config_digest);

struct ResultRow {
  std::string kind;  // "run" or "aggregate"
  std::string seed;
  int cycle = 0;
  std::string strategy;
  std::vector<std::pair<std::string, double>> values;

  double value(const std::string& column) const;
};

struct ResultsTable {
  std::string config_digest;
  std::vector<ResultRow> rows;
};

ResultsTable read_results(const std::string& path);

// Column names of the results table after kind, seed, cycle and strategy.
const std::vector<std::string>& result_metric_columns();

}  // namespace boxald

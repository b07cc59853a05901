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
#include "boxald/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "boxald/errors.hpp"

namespace boxald {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IngestError(std::string(what) + ": cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestError(std::string(what) + ": " + path + " is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  // Write to a sibling and rename so readers never see a partial file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << text;
    if (!out) throw Error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename " + tmp + " to " + path);
}

const json& require(const json& obj, const char* key, const std::string& record) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw IngestError("coco: " + record + " is missing \"" + key + "\"");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& record) {
  const json& v = require(obj, key, record);
  if (!v.is_number()) throw IngestError("coco: " + record + " field \"" + key + "\" is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw IngestError("coco: " + record + " field \"" + key + "\" is not finite");
  return d;
}

std::int64_t require_id(const json& obj, const char* key, const std::string& record) {
  const json& v = require(obj, key, record);
  if (!v.is_number_integer()) throw IngestError("coco: " + record + " field \"" + key + "\" is not an integer");
  return v.get<std::int64_t>();
}

const json& require_array(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw IngestError(std::string("coco: missing array \"") + key + "\"");
  return *it;
}

// ---- snapshot pieces -------------------------------------------------------

json box_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

BBox box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw SnapshotError("snapshot: box must be a 4-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json label_json(const LabeledBox& b) {
  return {{"box", box_json(b.box)}, {"class_id", b.class_id}, {"score_dist", b.score_dist},
          {"confidence", b.confidence}};
}

LabeledBox label_from(const json& j) {
  LabeledBox b;
  b.box = box_from(j.at("box"));
  b.class_id = j.at("class_id").get<int>();
  b.score_dist = j.at("score_dist").get<std::vector<double>>();
  b.confidence = j.at("confidence").get<double>();
  return b;
}

json pool_json(const PoolState& p) {
  json sparse = json::array();
  for (const auto& [id, boxes] : p.sparse) sparse.push_back({{"image_id", id}, {"boxes", boxes}});
  json background = json::array();
  for (const auto& [id, boxes] : p.verified_background) {
    json bs = json::array();
    for (const auto& b : boxes) bs.push_back(box_json(b));
    background.push_back({{"image_id", id}, {"boxes", bs}});
  }
  return {{"cycle", p.cycle},
          {"fully_labeled", p.fully_labeled},
          {"sparse", sparse},
          {"unlabeled", p.unlabeled},
          {"verified_background", background}};
}

PoolState pool_from(const json& j) {
  PoolState p;
  p.cycle = j.at("cycle").get<int>();
  p.fully_labeled = j.at("fully_labeled").get<std::set<ImageId>>();
  p.unlabeled = j.at("unlabeled").get<std::set<ImageId>>();
  for (const auto& e : j.at("sparse")) {
    p.sparse[e.at("image_id").get<ImageId>()] = e.at("boxes").get<std::set<std::size_t>>();
  }
  for (const auto& e : j.at("verified_background")) {
    auto& v = p.verified_background[e.at("image_id").get<ImageId>()];
    for (const auto& b : e.at("boxes")) v.push_back(box_from(b));
  }
  return p;
}

json ledger_json(const BudgetLedger& l) {
  json entries = json::array();
  for (const auto& e : l.entries) {
    entries.push_back({{"cycle", e.cycle},
                       {"boxes_charged", e.boxes_charged},
                       {"background_charged", e.background_charged},
                       {"touched", e.touched}});
  }
  return {{"entries", entries}, {"cumulative_boxes", l.cumulative_boxes}, {"init_overshoot", l.init_overshoot}};
}

BudgetLedger ledger_from(const json& j) {
  BudgetLedger l;
  for (const auto& e : j.at("entries")) {
    LedgerEntry le;
    le.cycle = e.at("cycle").get<int>();
    le.boxes_charged = e.at("boxes_charged").get<std::size_t>();
    le.background_charged = e.at("background_charged").get<double>();
    le.touched = e.at("touched").get<std::set<ImageId>>();
    l.entries.push_back(std::move(le));
  }
  l.cumulative_boxes = j.at("cumulative_boxes").get<std::size_t>();
  l.init_overshoot = j.at("init_overshoot").get<std::size_t>();
  return l;
}

json sim_params_json(const SimParams& p) {
  return {{"tau0", p.tau0},
          {"sigma0", p.sigma0},
          {"recall_floor", p.recall_floor},
          {"knowledge_scale", p.knowledge_scale},
          {"hard_gain", p.hard_gain},
          {"clutter_rate", p.clutter_rate},
          {"refine_base", p.refine_base},
          {"pseudo_weight", p.pseudo_weight}};
}

SimParams sim_params_from(const json& j) {
  SimParams p;
  p.tau0 = j.at("tau0").get<double>();
  p.sigma0 = j.at("sigma0").get<double>();
  p.recall_floor = j.at("recall_floor").get<double>();
  p.knowledge_scale = j.at("knowledge_scale").get<double>();
  p.hard_gain = j.at("hard_gain").get<double>();
  p.clutter_rate = j.at("clutter_rate").get<double>();
  p.refine_base = j.at("refine_base").get<double>();
  p.pseudo_weight = j.at("pseudo_weight").get<double>();
  return p;
}

json stream_json(const SupervisionStream& s) {
  json out = json::array();
  for (const auto& e : s) {
    out.push_back({{"label", label_json(e.label)},
                   {"provenance", e.provenance == Provenance::kHuman ? "human" : "pseudo"}});
  }
  return out;
}

SupervisionStream stream_from(const json& j) {
  SupervisionStream s;
  for (const auto& e : j) {
    SupervisionEntry se;
    se.label = label_from(e.at("label"));
    const auto prov = e.at("provenance").get<std::string>();
    if (prov != "human" && prov != "pseudo") throw SnapshotError("snapshot: unknown provenance " + prov);
    se.provenance = prov == "human" ? Provenance::kHuman : Provenance::kPseudo;
    s.push_back(std::move(se));
  }
  return s;
}

json report_json(const CycleReport& r) {
  return {{"seed", r.seed},
          {"cycle", r.cycle},
          {"strategy", r.strategy},
          {"cumulative_boxes", r.cumulative_boxes},
          {"cycle_boxes", r.cycle_boxes},
          {"images_touched", r.images_touched},
          {"background_charged", r.background_charged},
          {"proposed", r.proposed},
          {"images_labeled", r.images_labeled},
          {"images_sparse", r.images_sparse},
          {"images_unlabeled", r.images_unlabeled},
          {"map50", r.map50},
          {"map5095", r.map5095},
          {"mean_score", r.mean_score},
          {"max_score", r.max_score},
          {"hard_fraction", r.hard_fraction},
          {"objective", r.objective},
          {"score_quantiles", r.score_quantiles}};
}

CycleReport report_from(const json& j) {
  CycleReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.cycle = j.at("cycle").get<int>();
  r.strategy = j.at("strategy").get<std::string>();
  r.cumulative_boxes = j.at("cumulative_boxes").get<std::size_t>();
  r.cycle_boxes = j.at("cycle_boxes").get<std::size_t>();
  r.images_touched = j.at("images_touched").get<std::size_t>();
  r.background_charged = j.at("background_charged").get<double>();
  r.proposed = j.at("proposed").get<std::size_t>();
  r.images_labeled = j.at("images_labeled").get<std::size_t>();
  r.images_sparse = j.at("images_sparse").get<std::size_t>();
  r.images_unlabeled = j.at("images_unlabeled").get<std::size_t>();
  r.map50 = j.at("map50").get<double>();
  r.map5095 = j.at("map5095").get<double>();
  r.mean_score = j.at("mean_score").get<double>();
  r.max_score = j.at("max_score").get<double>();
  r.hard_fraction = j.at("hard_fraction").get<double>();
  r.objective = j.at("objective").get<double>();
  r.score_quantiles = j.at("score_quantiles").get<std::array<double, 5>>();
  return r;
}

json open_cycle_json(const OpenCycle& oc) {
  json queries = json::array();
  for (const auto& q : oc.batch.queries) {
    queries.push_back({{"image_id", q.image_id}, {"box", box_json(q.box)}, {"score", q.score}, {"class_id", q.class_id}});
  }
  json ranked = json::array();
  for (const auto& r : oc.ranked) ranked.push_back({{"image_id", r.image_id}, {"score", r.score}});
  json revealed = json::array();
  for (const auto& [id, box] : oc.revealed) revealed.push_back(json::array({id, box}));
  return {{"batch_cycle", oc.batch.cycle},
          {"queries", queries},
          {"answered", oc.answered},
          {"revealed_by_query", oc.revealed_by_query},
          {"ranked", ranked},
          {"revealed", revealed},
          {"force_closed", oc.force_closed}};
}

OpenCycle open_cycle_from(const json& j) {
  OpenCycle oc;
  oc.batch.cycle = j.at("batch_cycle").get<int>();
  for (const auto& q : j.at("queries")) {
    oc.batch.queries.push_back({q.at("image_id").get<ImageId>(), box_from(q.at("box")), q.at("score").get<double>(),
                                q.at("class_id").get<int>()});
  }
  oc.answered = j.at("answered").get<std::vector<bool>>();
  oc.revealed_by_query = j.at("revealed_by_query").get<std::vector<bool>>();
  for (const auto& r : j.at("ranked")) oc.ranked.push_back({r.at("image_id").get<ImageId>(), r.at("score").get<double>()});
  for (const auto& r : j.at("revealed")) oc.revealed.emplace_back(r.at(0).get<ImageId>(), r.at(1).get<std::size_t>());
  oc.force_closed = j.at("force_closed").get<bool>();
  if (oc.answered.size() != oc.batch.queries.size() || oc.revealed_by_query.size() != oc.batch.queries.size()) {
    throw SnapshotError("snapshot: open cycle flags do not match its queries");
  }
  return oc;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000" so identical runs print identical bytes.
  if (std::string_view(buf) == "-0.000000") return "0.000000";
  return buf;
}

std::vector<double> metric_values(const CycleReport& r) {
  return {static_cast<double>(r.cumulative_boxes), static_cast<double>(r.cycle_boxes),
          static_cast<double>(r.images_labeled),   static_cast<double>(r.images_sparse),
          static_cast<double>(r.images_unlabeled), r.map50,
          r.map5095,                               r.mean_score,
          r.max_score,                             r.hard_fraction,
          r.objective};
}

}  // namespace

// ---- COCO ------------------------------------------------------------------

IngestResult ingest_coco_json(const json& j) {
  if (!j.is_object()) throw IngestError("coco: top level must be an object");
  const json& images = require_array(j, "images");
  const json& annotations = require_array(j, "annotations");
  const json& categories = require_array(j, "categories");

  std::vector<Category> cats;
  std::unordered_map<std::int64_t, int> class_of;
  for (std::size_t k = 0; k < categories.size(); ++k) {
    const json& c = categories[k];
    const std::string rec = "categories[" + std::to_string(k) + "]";
    const std::int64_t id = require_id(c, "id", rec);
    if (class_of.count(id) != 0) throw IngestError("coco: " + rec + " repeats category id " + std::to_string(id));
    Category cat;
    cat.class_id = static_cast<int>(cats.size());
    cat.source_id = id;
    if (const auto it = c.find("name"); it != c.end() && it->is_string()) cat.name = it->get<std::string>();
    class_of.emplace(id, cat.class_id);
    cats.push_back(std::move(cat));
  }

  std::vector<ImageRecord> records;
  std::unordered_map<ImageId, std::size_t> pos;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const json& im = images[k];
    const std::string rec = "images[" + std::to_string(k) + "]";
    ImageRecord r;
    r.id = require_id(im, "id", rec);
    r.width = require_number(im, "width", rec);
    r.height = require_number(im, "height", rec);
    if (r.width <= 0 || r.height <= 0) throw IngestError("coco: " + rec + " has a non-positive size");
    if (const auto it = im.find("file_name"); it != im.end() && it->is_string()) r.file_name = it->get<std::string>();
    if (pos.count(r.id) != 0) throw IngestError("coco: " + rec + " repeats image id " + std::to_string(r.id));
    pos.emplace(r.id, records.size());
    records.push_back(std::move(r));
  }

  IngestResult out;
  for (std::size_t k = 0; k < annotations.size(); ++k) {
    const json& a = annotations[k];
    const std::string rec = "annotations[" + std::to_string(k) + "]";
    const ImageId image_id = require_id(a, "image_id", rec);
    const std::int64_t category = require_id(a, "category_id", rec);
    const json& bbox = require(a, "bbox", rec);
    if (!bbox.is_array() || bbox.size() != 4) throw IngestError("coco: " + rec + " bbox must be [x, y, w, h]");
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!bbox[i].is_number()) throw IngestError("coco: " + rec + " bbox holds a non-number");
      v[i] = bbox[i].get<double>();
      if (!std::isfinite(v[i])) throw IngestError("coco: " + rec + " bbox is not finite");
    }
    const auto pit = pos.find(image_id);
    if (pit == pos.end()) throw IngestError("coco: " + rec + " references unknown image " + std::to_string(image_id));
    const auto cit = class_of.find(category);
    if (cit == class_of.end()) {
      throw IngestError("coco: " + rec + " references unknown category " + std::to_string(category));
    }
    if (v[2] <= 0 || v[3] <= 0) {
      ++out.dropped_boxes;
      continue;
    }
    GroundTruthBox gt;
    gt.label.box = BBox::from_xywh(v[0], v[1], v[2], v[3]);
    gt.label.class_id = cit->second;
    if (const auto it = a.find("id"); it != a.end() && it->is_number_integer()) gt.source_id = it->get<std::int64_t>();
    if (const auto it = a.find("difficulty"); it != a.end() && it->is_number()) gt.difficulty = it->get<double>();
    records[pit->second].boxes.push_back(std::move(gt));
  }
  out.index = DatasetIndex(std::move(records), std::move(cats));
  return out;
}

IngestResult ingest_coco(const std::string& path) { return ingest_coco_json(read_json_file(path, "coco")); }

json export_coco_json(const DatasetIndex& dataset, const std::string& config_digest) {
  json images = json::array();
  json annotations = json::array();
  json categories = json::array();
  std::vector<std::int64_t> category_ids;
  for (const auto& c : dataset.categories()) {
    const std::int64_t id = c.source_id >= 0 ? c.source_id : c.class_id + 1;
    category_ids.push_back(id);
    categories.push_back({{"id", id}, {"name", c.name}});
  }
  std::int64_t next_ann = 1;
  for (const auto& img : dataset.images()) {
    for (const auto& b : img.boxes) next_ann = std::max(next_ann, b.source_id + 1);
  }
  for (const auto& img : dataset.images()) {
    images.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}, {"file_name", img.file_name}});
    for (const auto& b : img.boxes) {
      const BBox& bb = b.label.box;
      annotations.push_back({{"id", b.source_id >= 0 ? b.source_id : next_ann++},
                             {"image_id", img.id},
                             {"category_id", category_ids.at(static_cast<std::size_t>(b.label.class_id))},
                             {"bbox", json::array({bb.x1, bb.y1, bb.width(), bb.height()})},
                             {"area", bb.area()},
                             {"iscrowd", 0},
                             {"difficulty", b.difficulty}});
    }
  }
  json out = {{"images", images}, {"annotations", annotations}, {"categories", categories}};
  if (!config_digest.empty()) out["info"] = {{"config_digest", config_digest}};
  return out;
}

void export_coco(const DatasetIndex& dataset, const std::string& path, const std::string& config_digest) {
  write_text_file(path, export_coco_json(dataset, config_digest).dump(1) + "\n");
}

std::vector<ImageDetections> ingest_coco_results(const std::string& path, const DatasetIndex& dataset) {
  const json j = read_json_file(path, "coco results");
  if (!j.is_array()) throw IngestError("coco results: top level must be an array");
  std::unordered_map<std::int64_t, int> class_of;
  for (const auto& c : dataset.categories()) class_of.emplace(c.source_id >= 0 ? c.source_id : c.class_id + 1, c.class_id);
  std::map<ImageId, std::vector<LabeledBox>> grouped;
  for (const auto& img : dataset.images()) grouped[img.id];
  for (std::size_t k = 0; k < j.size(); ++k) {
    const json& r = j[k];
    const std::string rec = "results[" + std::to_string(k) + "]";
    const ImageId image_id = require_id(r, "image_id", rec);
    const std::int64_t category = require_id(r, "category_id", rec);
    const json& bbox = require(r, "bbox", rec);
    if (!bbox.is_array() || bbox.size() != 4) throw IngestError("coco: " + rec + " bbox must be [x, y, w, h]");
    const double score = require_number(r, "score", rec);
    if (!dataset.contains(image_id)) {
      throw IngestError("coco: " + rec + " references unknown image " + std::to_string(image_id));
    }
    const auto cit = class_of.find(category);
    if (cit == class_of.end()) {
      throw IngestError("coco: " + rec + " references unknown category " + std::to_string(category));
    }
    LabeledBox b;
    b.box = BBox::from_xywh(bbox[0].get<double>(), bbox[1].get<double>(), bbox[2].get<double>(), bbox[3].get<double>());
    b.class_id = cit->second;
    b.confidence = score;
    grouped[image_id].push_back(std::move(b));
  }
  std::vector<ImageDetections> out;
  for (auto& [id, boxes] : grouped) out.push_back({id, std::move(boxes)});
  return out;
}

std::vector<ImageDetections> ground_truth_detections(const DatasetIndex& dataset) {
  std::vector<ImageDetections> out;
  for (const auto& img : dataset.images()) {
    ImageDetections d{img.id, {}};
    for (const auto& b : img.boxes) d.boxes.push_back(b.label);
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

// ---- snapshots -------------------------------------------------------------

json snapshot_to_json(const CycleSnapshot& snapshot) {
  const ExperimentState& s = snapshot.state;
  json reports = json::array();
  for (const auto& r : s.reports) reports.push_back(report_json(r));
  json human = json::array();
  for (const auto& h : s.human_boxes) human.push_back({{"image_id", h.image_id}, {"label", label_json(h.label)}});
  json supervision = json::array();
  for (const auto& [id, m] : s.supervision) {
    supervision.push_back({{"image_id", id}, {"class_targets", stream_json(m.class_targets)},
                           {"box_targets", stream_json(m.box_targets)}});
  }
  json j = {{"format", kSnapshotFormat},
            {"config_digest", snapshot.config_digest},
            {"seed", s.seed},
            {"pool", pool_json(s.pool)},
            {"ledger", ledger_json(s.ledger)},
            {"detector",
             {{"params", sim_params_json(s.detector.params)},
              {"class_counts", s.detector.class_counts},
              {"hard_counts", s.detector.hard_counts},
              {"seed", s.detector.seed}}},
            {"chairman", {{"values", s.chairman.values}, {"step", s.chairman.step}}},
            {"reports", reports},
            {"human_boxes", human},
            {"supervision", supervision},
            {"open_cycle", s.open ? open_cycle_json(*s.open) : json(nullptr)}};
  return j;
}

CycleSnapshot snapshot_from_json(const json& j) {
  if (!j.is_object()) throw SnapshotError("snapshot: top level must be an object");
  const auto fmt = j.find("format");
  if (fmt == j.end() || !fmt->is_string()) throw SnapshotError("snapshot: missing format tag");
  if (fmt->get<std::string>() != kSnapshotFormat) {
    throw SnapshotError("snapshot: format " + fmt->get<std::string>() + " is not " + kSnapshotFormat);
  }
  try {
    CycleSnapshot out;
    out.config_digest = j.at("config_digest").get<std::string>();
    ExperimentState& s = out.state;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.pool = pool_from(j.at("pool"));
    s.ledger = ledger_from(j.at("ledger"));
    const json& d = j.at("detector");
    s.detector.params = sim_params_from(d.at("params"));
    s.detector.class_counts = d.at("class_counts").get<std::vector<double>>();
    s.detector.hard_counts = d.at("hard_counts").get<std::vector<double>>();
    s.detector.seed = d.at("seed").get<std::uint64_t>();
    s.chairman.values = j.at("chairman").at("values").get<std::vector<double>>();
    s.chairman.step = j.at("chairman").at("step").get<std::uint64_t>();
    for (const auto& r : j.at("reports")) s.reports.push_back(report_from(r));
    for (const auto& h : j.at("human_boxes")) {
      s.human_boxes.push_back({h.at("image_id").get<ImageId>(), label_from(h.at("label"))});
    }
    for (const auto& e : j.at("supervision")) {
      s.supervision[e.at("image_id").get<ImageId>()] = {stream_from(e.at("class_targets")),
                                                       stream_from(e.at("box_targets"))};
    }
    if (const json& oc = j.at("open_cycle"); !oc.is_null()) s.open = open_cycle_from(oc);
    return out;
  } catch (const json::exception& e) {
    throw SnapshotError(std::string("snapshot: malformed: ") + e.what());
  }
}

void save_snapshot(const CycleSnapshot& snapshot, const std::string& path) {
  write_text_file(path, snapshot_to_json(snapshot).dump(1) + "\n");
}

CycleSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SnapshotError("snapshot: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SnapshotError("snapshot: " + path + " is not valid JSON: " + e.what());
  }
  return snapshot_from_json(j);
}

// ---- results table ---------------------------------------------------------

const std::vector<std::string>& result_metric_columns() {
  static const std::vector<std::string> cols = {
      "cumulative_boxes", "cycle_boxes", "images_labeled", "images_sparse", "images_unlabeled", "map50",
      "map5095",          "mean_score",  "max_score",      "hard_fraction", "objective"};
  return cols;
}

void export_results(std::ostream& out, const std::vector<CycleReport>& reports, const std::string& config_digest) {
  const auto& cols = result_metric_columns();
  out << "# boxald results\n# config_digest=" << config_digest << "\n";
  out << "kind\tseed\tcycle\tstrategy";
  for (const auto& c : cols) out << '\t' << c;
  for (const auto& c : cols) out << '\t' << c << "_std";
  out << '\n';

  std::vector<std::pair<int, std::string>> keys;
  std::map<std::pair<int, std::string>, std::vector<std::vector<double>>> groups;
  for (const auto& r : reports) {
    const auto key = std::make_pair(r.cycle, r.strategy);
    if (groups.count(key) == 0) keys.push_back(key);
    groups[key].push_back(metric_values(r));
    out << "run\t" << r.seed << '\t' << r.cycle << '\t' << r.strategy;
    for (double v : metric_values(r)) out << '\t' << fixed(v);
    for (std::size_t k = 0; k < cols.size(); ++k) out << "\t-";
    out << '\n';
  }
  std::stable_sort(keys.begin(), keys.end());
  for (const auto& key : keys) {
    const auto& rows = groups[key];
    const double n = static_cast<double>(rows.size());
    std::vector<double> mean(cols.size(), 0.0), sd(cols.size(), 0.0);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      for (const auto& r : rows) mean[k] += r[k];
      mean[k] /= n;
      if (rows.size() > 1) {
        for (const auto& r : rows) sd[k] += (r[k] - mean[k]) * (r[k] - mean[k]);
        sd[k] = std::sqrt(sd[k] / (n - 1.0));
      }
    }
    out << "aggregate\t*\t" << key.first << '\t' << key.second;
    for (double v : mean) out << '\t' << fixed(v);
    for (double v : sd) out << '\t' << fixed(v);
    out << '\n';
  }
}

double ResultRow::value(const std::string& column) const {
  for (const auto& [name, v] : values) {
    if (name == column) return v;
  }
  return std::nan("");
}

ResultsTable read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("results: cannot open " + path);
  ResultsTable table;
  std::vector<std::string> header;
  std::string line;
  const std::string digest_tag = "# config_digest=";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind(digest_tag, 0) == 0) table.config_digest = line.substr(digest_tag.size());
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (header.empty()) {
      header = fields;
      if (header.size() < 4 || header[0] != "kind") throw IngestError("results: " + path + " has no header row");
      continue;
    }
    if (fields.size() != header.size()) throw IngestError("results: ragged row in " + path + ": " + line);
    ResultRow row;
    row.kind = fields[0];
    row.seed = fields[1];
    row.cycle = std::stoi(fields[2]);
    row.strategy = fields[3];
    for (std::size_t k = 4; k < fields.size(); ++k) {
      if (fields[k] == "-") continue;
      row.values.emplace_back(header[k], std::stod(fields[k]));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace boxald

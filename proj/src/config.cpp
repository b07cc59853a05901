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
#include "boxald/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "boxald/errors.hpp"

namespace boxald {

using nlohmann::json;

namespace {

template <typename E>
struct NamedValue {
  std::string_view name;
  E value;
};

constexpr NamedValue<Strategy> kStrategies[] = {{"compas", Strategy::kCompas},
                                                {"random", Strategy::kRandom},
                                                {"mean-entropy", Strategy::kMeanEntropy},
                                                {"boxcnt", Strategy::kBoxCnt},
                                                {"coreset", Strategy::kCoreSet}};
constexpr NamedValue<Protocol> kProtocols[] = {
    {"auto", Protocol::kAuto}, {"box", Protocol::kBox}, {"image", Protocol::kImage}};
constexpr NamedValue<BudgetUnit> kUnits[] = {{"boxes", BudgetUnit::kBoxes}, {"images", BudgetUnit::kImages}};
constexpr NamedValue<Supervision> kSupervision[] = {{"labeled", Supervision::kLabeledOnly},
                                                    {"mixed", Supervision::kMixed}};

template <typename E, std::size_t N>
std::string_view name_of(const NamedValue<E> (&table)[N], E v) {
  for (const auto& nv : table) {
    if (nv.value == v) return nv.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_named(const NamedValue<E> (&table)[N], std::string_view name, std::string_view what) {
  for (const auto& nv : table) {
    if (nv.name == name) return nv.value;
  }
  std::string options;
  for (const auto& nv : table) options += (options.empty() ? "" : ", ") + std::string(nv.name);
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) + "' (expected one of " +
                    options + ")");
}

// Reads known keys from an object and rejects everything else.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: " + path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: field " + path_ + key + " has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown field " + path_ + key);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::string_view to_string(Strategy s) { return name_of(kStrategies, s); }
std::string_view to_string(Protocol p) { return name_of(kProtocols, p); }
std::string_view to_string(BudgetUnit u) { return name_of(kUnits, u); }
std::string_view to_string(Supervision s) { return name_of(kSupervision, s); }
Strategy parse_strategy(std::string_view name) { return parse_named(kStrategies, name, "strategy"); }
Protocol parse_protocol(std::string_view name) { return parse_named(kProtocols, name, "protocol"); }
BudgetUnit parse_budget_unit(std::string_view name) { return parse_named(kUnits, name, "budget unit"); }
Supervision parse_supervision(std::string_view name) {
  return parse_named(kSupervision, name, "supervision mode");
}

Protocol RunConfig::effective_protocol() const {
  if (protocol != Protocol::kAuto) return protocol;
  return strategy == Strategy::kCompas ? Protocol::kBox : Protocol::kImage;
}

bool RunConfig::effective_pseudo_labels() const {
  return pseudo_labels.value_or(strategy == Strategy::kCompas);
}

void validate(const RunConfig& c) {
  auto unit_interval = [](double v, const char* name, bool open) {
    const bool ok = open ? (v > 0.0 && v < 1.0) : (v >= 0.0 && v <= 1.0);
    if (!ok) throw ConfigError(std::string("config: ") + name + (open ? " must lie in (0, 1)" : " must lie in [0, 1]"));
  };
  unit_interval(c.lambda_c, "lambda_c", false);
  unit_interval(c.lambda_g, "lambda_g", false);
  unit_interval(c.lambda_dedup, "lambda_dedup", false);
  unit_interval(c.intra_batch_iou, "intra_batch_iou", false);
  unit_interval(c.ema_alpha, "ema_alpha", false);
  unit_interval(c.tau_assign, "tau_assign", true);
  unit_interval(c.tau_match, "tau_match", true);
  unit_interval(c.nms_iou, "nms_iou", false);
  unit_interval(c.synth.hard_fraction, "synth.hard_fraction", false);
  if (c.lambda_r < 0.0) throw ConfigError("config: lambda_r must be >= 0");
  if (c.committee_size < 1) throw ConfigError("config: committee_size must be >= 1");
  if (c.init_budget < 1) throw ConfigError("config: init_budget must be >= 1");
  if (c.background_cost < 0.0) throw ConfigError("config: background_cost must be >= 0");
  if (c.over_provision < 1.0) throw ConfigError("config: over_provision must be >= 1");
  if (c.member_noise < 0.0) throw ConfigError("config: member_noise must be >= 0");
  if (c.jitter.n_jitter < 2) throw ConfigError("config: jitter.n_jitter must be >= 2");
  if (c.jitter.jitter_frac < 0.0) throw ConfigError("config: jitter.jitter_frac must be >= 0");
  if (c.views.scale_min <= 0.0 || c.views.scale_max < c.views.scale_min) {
    throw ConfigError("config: views need 0 < scale_min <= scale_max");
  }
  if (c.seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (c.budget_unit == BudgetUnit::kImages && c.effective_protocol() != Protocol::kImage) {
    throw ConfigError("config: an image-count budget requires the image protocol");
  }
  if (c.effective_protocol() == Protocol::kBox && c.strategy != Strategy::kCompas &&
      c.strategy != Strategy::kRandom) {
    throw ConfigError("config: box protocol supports the compas and random strategies only");
  }
  if (c.dataset_path.empty() && c.synth.n_images == 0) throw ConfigError("config: synth.n_images must be > 0");
  const SimParams& s = c.sim;
  if (s.tau0 < 0 || s.sigma0 < 0 || s.recall_floor < 0 || s.recall_floor > 1 || s.knowledge_scale < 0 ||
      s.hard_gain < 0 || s.clutter_rate < 0 || s.refine_base < 0 || s.refine_base > 1 || s.pseudo_weight < 0) {
    throw ConfigError("config: sim parameters out of range");
  }
}

json to_json(const RunConfig& c) {
  json j;
  j["dataset_path"] = c.dataset_path;
  j["test_path"] = c.test_path;
  j["synth"] = {{"n_images", c.synth.n_images},   {"num_classes", c.synth.num_classes},
                {"mean_boxes", c.synth.mean_boxes}, {"hard_fraction", c.synth.hard_fraction},
                {"width", c.synth.width},           {"height", c.synth.height}};
  j["test_images"] = c.test_images;
  j["strategy"] = to_string(c.strategy);
  j["protocol"] = to_string(c.protocol);
  j["budget_unit"] = to_string(c.budget_unit);
  j["supervision"] = to_string(c.supervision);
  j["pseudo_labels"] = c.pseudo_labels ? json(*c.pseudo_labels) : json(nullptr);
  j["init_budget"] = c.init_budget;
  j["per_cycle_budget"] = c.per_cycle_budget;
  j["n_cycles"] = c.n_cycles;
  j["lambda_c"] = c.lambda_c;
  j["lambda_r"] = c.lambda_r;
  j["lambda_g"] = c.lambda_g;
  j["lambda_dedup"] = c.lambda_dedup;
  j["committee_size"] = c.committee_size;
  j["ema_alpha"] = c.ema_alpha;
  j["ema_steps"] = c.ema_steps;
  j["tau_assign"] = c.tau_assign;
  j["tau_match"] = c.tau_match;
  j["background_cost"] = c.background_cost;
  j["over_provision"] = c.over_provision;
  j["intra_batch_iou"] = c.intra_batch_iou;
  j["class_aware_assign"] = c.class_aware_assign;
  j["ceiling_score"] = c.ceiling_score ? json(*c.ceiling_score) : json(nullptr);
  j["nms_iou"] = c.nms_iou;
  j["boxcnt_floor"] = c.boxcnt_floor;
  j["member_noise"] = c.member_noise;
  j["views"] = {{"flip_prob", c.views.flip_prob},
                {"scale_min", c.views.scale_min},
                {"scale_max", c.views.scale_max},
                {"max_shift", c.views.max_shift}};
  j["jitter"] = {{"n_jitter", c.jitter.n_jitter}, {"jitter_frac", c.jitter.jitter_frac}};
  j["sim"] = {{"tau0", c.sim.tau0},
              {"sigma0", c.sim.sigma0},
              {"recall_floor", c.sim.recall_floor},
              {"knowledge_scale", c.sim.knowledge_scale},
              {"hard_gain", c.sim.hard_gain},
              {"clutter_rate", c.sim.clutter_rate},
              {"refine_base", c.sim.refine_base},
              {"pseudo_weight", c.sim.pseudo_weight}};
  j["seeds"] = c.seeds;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  StrictObject o(j, "");
  o.get("dataset_path", c.dataset_path);
  o.get("test_path", c.test_path);
  if (const json* s = o.child("synth")) {
    StrictObject so(*s, "synth.");
    so.get("n_images", c.synth.n_images);
    so.get("num_classes", c.synth.num_classes);
    so.get("mean_boxes", c.synth.mean_boxes);
    so.get("hard_fraction", c.synth.hard_fraction);
    so.get("width", c.synth.width);
    so.get("height", c.synth.height);
    so.finish();
  }
  o.get("test_images", c.test_images);
  std::string name;
  name = std::string(to_string(c.strategy));
  o.get("strategy", name);
  c.strategy = parse_strategy(name);
  name = std::string(to_string(c.protocol));
  o.get("protocol", name);
  c.protocol = parse_protocol(name);
  name = std::string(to_string(c.budget_unit));
  o.get("budget_unit", name);
  c.budget_unit = parse_budget_unit(name);
  name = std::string(to_string(c.supervision));
  o.get("supervision", name);
  c.supervision = parse_supervision(name);
  o.get_optional("pseudo_labels", c.pseudo_labels);
  o.get("init_budget", c.init_budget);
  o.get("per_cycle_budget", c.per_cycle_budget);
  o.get("n_cycles", c.n_cycles);
  o.get("lambda_c", c.lambda_c);
  o.get("lambda_r", c.lambda_r);
  o.get("lambda_g", c.lambda_g);
  o.get("lambda_dedup", c.lambda_dedup);
  o.get("committee_size", c.committee_size);
  o.get("ema_alpha", c.ema_alpha);
  o.get("ema_steps", c.ema_steps);
  o.get("tau_assign", c.tau_assign);
  o.get("tau_match", c.tau_match);
  o.get("background_cost", c.background_cost);
  o.get("over_provision", c.over_provision);
  o.get("intra_batch_iou", c.intra_batch_iou);
  o.get("class_aware_assign", c.class_aware_assign);
  o.get_optional("ceiling_score", c.ceiling_score);
  o.get("nms_iou", c.nms_iou);
  o.get("boxcnt_floor", c.boxcnt_floor);
  o.get("member_noise", c.member_noise);
  if (const json* v = o.child("views")) {
    StrictObject vo(*v, "views.");
    vo.get("flip_prob", c.views.flip_prob);
    vo.get("scale_min", c.views.scale_min);
    vo.get("scale_max", c.views.scale_max);
    vo.get("max_shift", c.views.max_shift);
    vo.finish();
  }
  if (const json* v = o.child("jitter")) {
    StrictObject jo(*v, "jitter.");
    jo.get("n_jitter", c.jitter.n_jitter);
    jo.get("jitter_frac", c.jitter.jitter_frac);
    jo.finish();
  }
  if (const json* v = o.child("sim")) {
    StrictObject so(*v, "sim.");
    so.get("tau0", c.sim.tau0);
    so.get("sigma0", c.sim.sigma0);
    so.get("recall_floor", c.sim.recall_floor);
    so.get("knowledge_scale", c.sim.knowledge_scale);
    so.get("hard_gain", c.sim.hard_gain);
    so.get("clutter_rate", c.sim.clutter_rate);
    so.get("refine_base", c.sim.refine_base);
    so.get("pseudo_weight", c.sim.pseudo_weight);
    so.finish();
  }
  o.get("seeds", c.seeds);
  o.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string config_digest(const RunConfig& config) { return fnv1a_hex(to_json(config).dump()); }

}  // namespace boxald

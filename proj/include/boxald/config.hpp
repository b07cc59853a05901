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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "boxald/pseudo.hpp"
#include "boxald/scoring.hpp"
#include "boxald/simdet.hpp"

namespace boxald {

enum class Strategy { kCompas, kRandom, kMeanEntropy, kBoxCnt, kCoreSet };
// Box protocol: prompt individual boxes. Image protocol: exhaustively label
// whole images in rank order.
enum class Protocol { kAuto, kBox, kImage };
enum class BudgetUnit { kBoxes, kImages };
enum class Supervision { kLabeledOnly, kMixed };

std::string_view to_string(Strategy s);
std::string_view to_string(Protocol p);
std::string_view to_string(BudgetUnit u);
std::string_view to_string(Supervision s);
// Throw ConfigError on unknown names.
Strategy parse_strategy(std::string_view name);
Protocol parse_protocol(std::string_view name);
BudgetUnit parse_budget_unit(std::string_view name);
Supervision parse_supervision(std::string_view name);

struct RunConfig {
  // Dataset: a COCO annotation file, or synthesis parameters when empty.
  std::string dataset_path;
  std::string test_path;
  SynthOptions synth;
  std::size_t test_images = 200;

  Strategy strategy = Strategy::kCompas;
  Protocol protocol = Protocol::kAuto;
  BudgetUnit budget_unit = BudgetUnit::kBoxes;
  Supervision supervision = Supervision::kLabeledOnly;
  std::optional<bool> pseudo_labels;  // default: enabled for compas only

  std::size_t init_budget = 120;
  std::size_t per_cycle_budget = 60;
  std::size_t n_cycles = 5;

  double lambda_c = kDefaultLambdaC;
  double lambda_r = kDefaultLambdaR;
  double lambda_g = kDefaultLambdaG;
  double lambda_dedup = kDefaultLambdaG;
  std::size_t committee_size = 10;
  double ema_alpha = kDefaultEmaAlpha;
  std::size_t ema_steps = 5000;  // chairman updates per cycle
  double tau_assign = 0.5;
  double tau_match = 0.5;
  double background_cost = 0.0;
  double over_provision = 1.5;
  double intra_batch_iou = 0.5;
  bool class_aware_assign = false;
  std::optional<double> ceiling_score;
  double nms_iou = 0.5;
  double boxcnt_floor = 0.3;
  double member_noise = 0.05;
  ViewParams views;
  JitterOptions jitter;
  SimParams sim;

  std::vector<std::uint64_t> seeds = {1};

  Protocol effective_protocol() const;
  bool effective_pseudo_labels() const;
};

// Throws ConfigError naming the offending field.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
// Unknown keys are rejected; missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Stable 64-bit FNV-1a digest of the canonical JSON form, as 16 hex digits.
std::string config_digest(const RunConfig& config);
std::string fnv1a_hex(std::string_view bytes);

}  // namespace boxald

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
#include <span>
#include <vector>

#include "boxald/geometry.hpp"
#include "boxald/scoring.hpp"

namespace boxald {

inline constexpr double kDefaultLambdaC = 0.9;
inline constexpr double kDefaultLambdaR = 0.02;
inline constexpr double kDefaultLambdaG = 0.4;

struct PseudoSet {
  std::vector<LabeledBox> cls_pseudo;
  std::vector<LabeledBox> loc_pseudo;
};

enum class Provenance { kHuman, kPseudo };

struct SupervisionEntry {
  LabeledBox label;
  Provenance provenance = Provenance::kHuman;

  friend bool operator==(const SupervisionEntry&, const SupervisionEntry&) = default;
};

using SupervisionStream = std::vector<SupervisionEntry>;

struct MergedSupervision {
  SupervisionStream class_targets;
  SupervisionStream box_targets;

  friend bool operator==(const MergedSupervision&, const MergedSupervision&) = default;
};

struct ObjectiveBreakdown {
  double labeled_loss = 0.0;
  double sparse_loss = 0.0;
  double unlabeled_loss = 0.0;
  std::size_t n_labeled = 0;
  std::size_t n_sparse = 0;
  std::size_t n_unlabeled = 0;
  double total = 0.0;
};

std::vector<LabeledBox> filter_cls_pseudo(std::span<const LabeledBox> predictions, double lambda_c);

struct JitterOptions {
  std::size_t n_jitter = 10;
  double jitter_frac = 0.06;
};

// Perturbs each candidate n_jitter times, refines every copy and keeps the
// candidate when the normalized spread of the refined copies is below
// lambda_r. Throws ConfigError when n_jitter < 2.
std::vector<LabeledBox> filter_loc_pseudo(std::span<const LabeledBox> predictions,
                                          const Refiner& refiner, double lambda_r,
                                          const JitterOptions& jitter, std::uint64_t seed);

// Localization stability of a single candidate, as used by filter_loc_pseudo.
double jitter_deviation(const LabeledBox& candidate, const Refiner& refiner,
                        const JitterOptions& jitter, std::uint64_t seed);

// human ∪ {p in pseudo : IoU(p, g) <= lambda_g for every human g}.
SupervisionStream merge_stream(std::span<const LabeledBox> human, std::span<const LabeledBox> pseudo,
                               double lambda_g);

MergedSupervision merge_supervision(std::span<const LabeledBox> human, const PseudoSet& pseudo,
                                    double lambda_g);

// total = L_l + (N_s / N_l) * L_s, plus (N_u / N_l) * L_u when mixed.
// Throws ConfigError when N_l == 0 or a loss is negative.
ObjectiveBreakdown compose_objective(double labeled_loss, double sparse_loss, double unlabeled_loss,
                                     std::size_t n_labeled, std::size_t n_sparse,
                                     std::size_t n_unlabeled, bool mixed);

}  // namespace boxald

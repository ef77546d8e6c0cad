// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Strategy validation and correction, danger zones, fallback presets and
// accuracy-collapse detection.

#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "macprune/netgraph.hpp"
#include "macprune/strategy.hpp"

namespace macprune {

inline constexpr double kDangerRadius = 0.05;
inline constexpr double kZoneExitOffset = 1e-6;

struct SafetyLimits {
  DatasetProfile dataset_profile = DatasetProfile::kSynthetic;
  // Per-unit ceilings for ViT effective ratios, as fractions of the run's
  // target ratio t. The ceiling is max(factor*t, min(fb_max*t, fb_abs)) so
  // that the fallback preset is always admissible.
  double max_mlp_factor = 0.2;
  double max_qkv_factor = 0.1;
  double fallback_mlp_max = 1.4;
  double fallback_mlp_abs = 0.7;
  double fallback_qkv_max = 1.0;
  double fallback_qkv_abs = 0.5;
  bool proj_allowed = true;
  bool head_allowed = true;
  double total_reduction_cap_pct = 100.0;
  double absolute_mlp_cap = 1.6;  // multiplier
  double absolute_qkv_cap = 1.2;  // multiplier
  double collapse_threshold_pct = 30.0;
  int fallback_round_to = 1;
  double danger_radius = kDangerRadius;

  static SafetyLimits for_profile(DatasetProfile profile);

  double mlp_effective_cap(double target_ratio) const;
  double qkv_effective_cap(double target_ratio) const;
};

nlohmann::ordered_json to_json(const SafetyLimits& limits);
// Overrides individual fields of `base`.
SafetyLimits limits_from_json(const nlohmann::json& doc, SafetyLimits base);

struct DangerZone {
  Criterion criterion = Criterion::kTaylor;
  int round_to = 1;
  PruneMode mode = PruneMode::kCnn;
  std::vector<double> components;
  double radius = kDangerRadius;
};

DangerZone zone_around(const Strategy& failed, double radius = kDangerRadius);

// Index of the first zone containing the candidate: same criterion, round_to
// and mode, every component within radius (inclusive).
std::optional<std::size_t> in_danger_zone(const Strategy& candidate, const std::vector<DangerZone>& zones);

// Thrown when no admissible correction exists; callers use fallback_preset.
class UnrecoverableStrategy : public std::runtime_error {
 public:
  explicit UnrecoverableStrategy(const std::string& what) : std::runtime_error(what) {}
};

struct SafetyContext {
  double target_ratio = 0.0;  // 1 - M_target / M_base
  std::vector<DangerZone> zones;
  // Predicted total MAC reduction in percent; stage 3 is skipped when unset.
  std::function<double(const Strategy&)> predicted_reduction_pct;
};

struct SafetyResult {
  Strategy strategy;
  std::vector<std::string> log;
};

SafetyResult validate_and_correct(const Strategy& strategy, const SafetyContext& context, const SafetyLimits& limits);

// True when validate_and_correct leaves the strategy unchanged with an empty log.
bool passes_validation(const Strategy& strategy, const SafetyContext& context, const SafetyLimits& limits);

// ViT presets follow the dataset tables; CNN mode uses the quadratic-model
// channel ratio 1 - sqrt(1 - t).
Strategy fallback_preset(DatasetProfile profile, double target_ratio, PruneMode mode = PruneMode::kVit);
Strategy fallback_preset(const SafetyLimits& limits, double target_ratio, PruneMode mode = PruneMode::kVit);

bool detect_collapse(double zero_shot_acc_pct, DatasetProfile profile);
bool detect_collapse(double zero_shot_acc_pct, const SafetyLimits& limits);

}  // namespace macprune

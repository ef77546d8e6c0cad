// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "macprune/isomorphic.hpp"

namespace macprune {

enum class Criterion { kTaylor, kL1Norm, kL2Norm, kRandom };
enum class PruneMode { kCnn, kVit };

std::string_view to_string(Criterion c);
std::string_view to_string(PruneMode m);
std::optional<Criterion> parse_criterion(std::string_view text);
std::optional<PruneMode> parse_prune_mode(std::string_view text);

// Upper bound on any effective per-unit pruning ratio.
inline constexpr double kMaxEffectiveRatio = 0.85;

bool is_valid_round_to(int round_to);

struct GroupMultipliers {
  double mlp = 0.0;
  double qkv = 0.0;
  double proj = 0.0;
  double head = 0.0;

  double get(MultiplierKey key) const;
  void set(MultiplierKey key, double value);
  bool operator==(const GroupMultipliers&) const = default;
};

struct Strategy {
  Criterion criterion = Criterion::kTaylor;
  PruneMode mode = PruneMode::kCnn;
  double channel_pruning_ratio = 0.0;  // CNN mode
  GroupMultipliers multipliers;        // ViT mode
  double base_ratio = 0.0;             // ViT mode
  int round_to = 1;
  bool global_pruning = true;
  std::optional<double> expected_achieved_macs;
  std::string rationale;

  // CNN mode: channel ratio for every key (qkv prunes per-head width, heads
  // untouched). ViT mode: base_ratio * multiplier; cnn-channel keys get 0.
  // Always clamped to [0, kMaxEffectiveRatio].
  double effective_ratio(MultiplierKey key) const;

  // Tunable components compared by danger zones: {ratio} in CNN mode,
  // {base_ratio, mlp, qkv, proj, head} in ViT mode.
  std::vector<double> components() const;
  void set_component(std::size_t index, double value);

  // Exact equality of the pruning configuration (rationale and estimates ignored).
  bool same_configuration(const Strategy& other) const;
};

// Configuration fingerprint with components rounded to `quantum`.
std::string signature(const Strategy& s, double quantum = 1e-3);

// One-line human summary, e.g. "taylor r=0.320 rt=2 global".
std::string summarize(const Strategy& s);

// Thrown when a strategy document lacks a required field or has a bad value.
class StrategyFormatError : public std::runtime_error {
 public:
  explicit StrategyFormatError(const std::string& what) : std::runtime_error(what) {}
};

nlohmann::ordered_json to_json(const Strategy& s);

// Accepts the CNN analysis schema (channel_pruning_ratio at top level) and
// the ViT schema (isomorphic_group_ratios object). Unknown fields ignored.
// `default_base_ratio` supplies base_ratio when a ViT document omits it.
Strategy strategy_from_json(const nlohmann::json& doc, double default_base_ratio = 0.0);

}  // namespace macprune

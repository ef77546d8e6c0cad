// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/safety.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace macprune {

namespace {

constexpr double kCompareSlack = 1e-9;
constexpr int kMaxZoneExits = 64;
constexpr int kRoundToLadder[] = {1, 2, 4, 8, 16};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int snap_round_to(int rt) {
  int best = 1;
  for (int v : kRoundToLadder) {
    if (v <= rt) best = v;
  }
  return best;
}

double json_number_or_inf(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

// Stage 1 clamps. Returns true when anything changed.
bool clamp_individual(Strategy& s, double t, const SafetyLimits& lim, std::vector<std::string>* log) {
  bool changed = false;
  auto note = [&](const std::string& msg) {
    changed = true;
    if (log) log->push_back(msg);
  };
  if (!is_valid_round_to(s.round_to)) {
    const int snapped = snap_round_to(s.round_to);
    note("stage1: round_to " + std::to_string(s.round_to) + " -> " + std::to_string(snapped));
    s.round_to = snapped;
  }
  if (s.mode == PruneMode::kCnn) {
    if (s.channel_pruning_ratio < 0.0) {
      note("stage1: channel_pruning_ratio " + fmt(s.channel_pruning_ratio) + " -> 0");
      s.channel_pruning_ratio = 0.0;
    }
    if (s.channel_pruning_ratio > kMaxEffectiveRatio + kCompareSlack) {
      note("stage1: channel_pruning_ratio " + fmt(s.channel_pruning_ratio) + " -> " + fmt(kMaxEffectiveRatio));
      s.channel_pruning_ratio = kMaxEffectiveRatio;
    }
    return changed;
  }

  if (s.base_ratio < 0.0) {
    note("stage1: base_ratio " + fmt(s.base_ratio) + " -> 0");
    s.base_ratio = 0.0;
  }
  if (s.base_ratio > kMaxEffectiveRatio + kCompareSlack) {
    note("stage1: base_ratio " + fmt(s.base_ratio) + " -> " + fmt(kMaxEffectiveRatio));
    s.base_ratio = kMaxEffectiveRatio;
  }
  for (MultiplierKey k : {MultiplierKey::kMlp, MultiplierKey::kQkv, MultiplierKey::kProj, MultiplierKey::kHead}) {
    if (s.multipliers.get(k) < 0.0) {
      note("stage1: " + std::string(to_string(k)) + " multiplier " + fmt(s.multipliers.get(k)) + " -> 0");
      s.multipliers.set(k, 0.0);
    }
  }
  if (!lim.proj_allowed && s.multipliers.proj != 0.0) {
    note("stage1: proj multiplier " + fmt(s.multipliers.proj) + " -> 0 (projection layers preserved)");
    s.multipliers.proj = 0.0;
  }
  if (!lim.head_allowed && s.multipliers.head != 0.0) {
    note("stage1: head multiplier " + fmt(s.multipliers.head) + " -> 0 (attention heads preserved)");
    s.multipliers.head = 0.0;
  }
  const double base = s.base_ratio;
  auto cap_eff = [&](MultiplierKey k, double cap) {
    const double m = s.multipliers.get(k);
    if (base > 0.0 && base * m > cap + kCompareSlack) {
      const double nm = cap / base;
      note("stage1: " + std::string(to_string(k)) + " multiplier " + fmt(m) + " -> " + fmt(nm) +
           " (effective ratio capped at " + fmt(cap) + ")");
      s.multipliers.set(k, nm);
    }
  };
  cap_eff(MultiplierKey::kMlp, lim.mlp_effective_cap(t));
  cap_eff(MultiplierKey::kQkv, lim.qkv_effective_cap(t));
  auto cap_mult = [&](MultiplierKey k, double cap) {
    const double m = s.multipliers.get(k);
    if (m > cap + kCompareSlack) {
      note("stage1: " + std::string(to_string(k)) + " multiplier " + fmt(m) + " -> " + fmt(cap) + " (absolute cap)");
      s.multipliers.set(k, cap);
    }
  };
  cap_mult(MultiplierKey::kMlp, lim.absolute_mlp_cap);
  cap_mult(MultiplierKey::kQkv, lim.absolute_qkv_cap);
  cap_eff(MultiplierKey::kProj, kMaxEffectiveRatio);
  cap_eff(MultiplierKey::kHead, kMaxEffectiveRatio);
  return changed;
}

bool admissible(const Strategy& s, double t, const SafetyLimits& lim) {
  Strategy copy = s;
  return !clamp_individual(copy, t, lim, nullptr);
}

}  // namespace

SafetyLimits SafetyLimits::for_profile(DatasetProfile profile) {
  SafetyLimits l;
  l.dataset_profile = profile;
  if (profile == DatasetProfile::kImagenetLike) {
    l.max_mlp_factor = 0.6;
    l.max_qkv_factor = 0.3;
    l.fallback_mlp_max = 1.0;
    l.fallback_mlp_abs = 0.4;
    l.fallback_qkv_max = 0.8;
    l.fallback_qkv_abs = 0.25;
    l.proj_allowed = false;
    l.head_allowed = false;
    l.total_reduction_cap_pct = 40.0;
    l.absolute_mlp_cap = std::numeric_limits<double>::infinity();
    l.absolute_qkv_cap = std::numeric_limits<double>::infinity();
    l.collapse_threshold_pct = 1.0;
    l.fallback_round_to = 2;
  }
  return l;
}

double SafetyLimits::mlp_effective_cap(double t) const {
  return std::min(kMaxEffectiveRatio, std::max(max_mlp_factor * t, std::min(fallback_mlp_max * t, fallback_mlp_abs)));
}

double SafetyLimits::qkv_effective_cap(double t) const {
  return std::min(kMaxEffectiveRatio, std::max(max_qkv_factor * t, std::min(fallback_qkv_max * t, fallback_qkv_abs)));
}

nlohmann::ordered_json to_json(const SafetyLimits& l) {
  auto finite_or_null = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::ordered_json j;
  j["dataset_profile"] = std::string(to_string(l.dataset_profile));
  j["max_mlp_factor"] = l.max_mlp_factor;
  j["max_qkv_factor"] = l.max_qkv_factor;
  j["fallback_mlp_max"] = l.fallback_mlp_max;
  j["fallback_mlp_abs"] = l.fallback_mlp_abs;
  j["fallback_qkv_max"] = l.fallback_qkv_max;
  j["fallback_qkv_abs"] = l.fallback_qkv_abs;
  j["proj_allowed"] = l.proj_allowed;
  j["head_allowed"] = l.head_allowed;
  j["total_reduction_cap_pct"] = l.total_reduction_cap_pct;
  j["absolute_mlp_cap"] = finite_or_null(l.absolute_mlp_cap);
  j["absolute_qkv_cap"] = finite_or_null(l.absolute_qkv_cap);
  j["collapse_threshold_pct"] = l.collapse_threshold_pct;
  j["fallback_round_to"] = l.fallback_round_to;
  j["danger_radius"] = l.danger_radius;
  return j;
}

SafetyLimits limits_from_json(const nlohmann::json& doc, SafetyLimits l) {
  auto num = [&](const char* key, double& field) {
    if (doc.contains(key)) field = doc[key].get<double>();
  };
  num("max_mlp_factor", l.max_mlp_factor);
  num("max_qkv_factor", l.max_qkv_factor);
  num("fallback_mlp_max", l.fallback_mlp_max);
  num("fallback_mlp_abs", l.fallback_mlp_abs);
  num("fallback_qkv_max", l.fallback_qkv_max);
  num("fallback_qkv_abs", l.fallback_qkv_abs);
  num("total_reduction_cap_pct", l.total_reduction_cap_pct);
  num("collapse_threshold_pct", l.collapse_threshold_pct);
  num("danger_radius", l.danger_radius);
  if (doc.contains("absolute_mlp_cap")) l.absolute_mlp_cap = json_number_or_inf(doc["absolute_mlp_cap"]);
  if (doc.contains("absolute_qkv_cap")) l.absolute_qkv_cap = json_number_or_inf(doc["absolute_qkv_cap"]);
  if (doc.contains("proj_allowed")) l.proj_allowed = doc["proj_allowed"].get<bool>();
  if (doc.contains("head_allowed")) l.head_allowed = doc["head_allowed"].get<bool>();
  if (doc.contains("fallback_round_to")) l.fallback_round_to = doc["fallback_round_to"].get<int>();
  return l;
}

DangerZone zone_around(const Strategy& failed, double radius) {
  return DangerZone{failed.criterion, failed.round_to, failed.mode, failed.components(), radius};
}

std::optional<std::size_t> in_danger_zone(const Strategy& candidate, const std::vector<DangerZone>& zones) {
  const auto comps = candidate.components();
  for (std::size_t z = 0; z < zones.size(); ++z) {
    const DangerZone& zone = zones[z];
    if (zone.criterion != candidate.criterion || zone.round_to != candidate.round_to || zone.mode != candidate.mode ||
        zone.components.size() != comps.size()) {
      continue;
    }
    bool inside = true;
    for (std::size_t k = 0; k < comps.size() && inside; ++k) {
      inside = std::abs(comps[k] - zone.components[k]) <= zone.radius + kCompareSlack;
    }
    if (inside) return z;
  }
  return std::nullopt;
}

SafetyResult validate_and_correct(const Strategy& strategy, const SafetyContext& ctx, const SafetyLimits& lim) {
  SafetyResult res{strategy, {}};
  Strategy& s = res.strategy;
  const double t = ctx.target_ratio;

  // Stage 1: individual limits.
  clamp_individual(s, t, lim, &res.log);

  // Stage 2: leave every danger zone by the smallest admissible move.
  for (int step = 0; step < kMaxZoneExits; ++step) {
    const auto hit = in_danger_zone(s, ctx.zones);
    if (!hit) break;
    const DangerZone& zone = ctx.zones[*hit];
    const auto comps = s.components();
    std::optional<Strategy> best;
    double best_move = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      for (double dir : {-1.0, 1.0}) {
        const double v = zone.components[k] + dir * (zone.radius + kZoneExitOffset);
        if (v < 0.0) continue;
        Strategy cand = s;
        cand.set_component(k, v);
        if (!admissible(cand, t, lim)) continue;
        const double move = std::abs(v - comps[k]);
        if (!best || move < best_move - 1e-15) {
          best = cand;
          best_move = move;
        }
      }
    }
    if (!best) throw UnrecoverableStrategy("no admissible exit from danger zone around " + signature(s));
    res.log.push_back("stage2: moved out of danger zone " + std::to_string(*hit) + ": " + summarize(s) + " -> " +
                      summarize(*best));
    s = *best;
    if (step + 1 == kMaxZoneExits && in_danger_zone(s, ctx.zones)) {
      throw UnrecoverableStrategy("strategy is surrounded by danger zones");
    }
  }

  // Stage 3: estimated total reduction.
  if (s.mode == PruneMode::kVit && ctx.predicted_reduction_pct) {
    const double pct = ctx.predicted_reduction_pct(s);
    if (pct > lim.total_reduction_cap_pct + kCompareSlack) {
      throw UnrecoverableStrategy("predicted MAC reduction " + fmt(pct) + "% exceeds the " +
                                  fmt(lim.total_reduction_cap_pct) + "% cap");
    }
  }

  // Stage 4: absolute guardrails.
  for (std::size_t k = 0; k < s.components().size(); ++k) {
    const double v = s.components()[k];
    if (!std::isfinite(v)) throw UnrecoverableStrategy("strategy component is not finite");
  }
  if (s.mode == PruneMode::kVit) {
    for (MultiplierKey k : {MultiplierKey::kMlp, MultiplierKey::kQkv, MultiplierKey::kProj, MultiplierKey::kHead}) {
      if (s.base_ratio * s.multipliers.get(k) > kMaxEffectiveRatio + kCompareSlack) {
        const double nm = kMaxEffectiveRatio / s.base_ratio;
        res.log.push_back("stage4: " + std::string(to_string(k)) + " multiplier " + fmt(s.multipliers.get(k)) +
                          " -> " + fmt(nm));
        s.multipliers.set(k, nm);
      }
    }
  }
  return res;
}

bool passes_validation(const Strategy& strategy, const SafetyContext& context, const SafetyLimits& limits) {
  try {
    const auto r = validate_and_correct(strategy, context, limits);
    return r.log.empty() && r.strategy.same_configuration(strategy);
  } catch (const UnrecoverableStrategy&) {
    return false;
  }
}

Strategy fallback_preset(const SafetyLimits& lim, double t, PruneMode mode) {
  if (!(t > 0.0) || t > 1.0) throw std::invalid_argument("fallback target ratio must lie in (0, 1]");
  Strategy s;
  s.criterion = Criterion::kTaylor;
  s.mode = mode;
  s.round_to = lim.fallback_round_to;
  s.rationale = "fallback preset";
  if (mode == PruneMode::kCnn) {
    s.channel_pruning_ratio = std::min(kMaxEffectiveRatio, 1.0 - std::sqrt(1.0 - t));
    return s;
  }
  s.base_ratio = std::min(kMaxEffectiveRatio, t);
  s.multipliers.qkv = std::min(lim.fallback_qkv_max, lim.fallback_qkv_abs / t);
  s.multipliers.mlp = std::min(lim.fallback_mlp_max, lim.fallback_mlp_abs / t);
  s.multipliers.proj = 0.0;
  s.multipliers.head = 0.0;
  return s;
}

Strategy fallback_preset(DatasetProfile profile, double t, PruneMode mode) {
  return fallback_preset(SafetyLimits::for_profile(profile), t, mode);
}

bool detect_collapse(double acc, const SafetyLimits& limits) { return acc < limits.collapse_threshold_pct; }

bool detect_collapse(double acc, DatasetProfile profile) {
  return detect_collapse(acc, SafetyLimits::for_profile(profile));
}

}  // namespace macprune

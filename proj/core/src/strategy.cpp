// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/strategy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace macprune {

namespace {

constexpr std::array<std::pair<Criterion, std::string_view>, 4> kCriterionNames{{
    {Criterion::kTaylor, "taylor"},
    {Criterion::kL1Norm, "l1norm"},
    {Criterion::kL2Norm, "l2norm"},
    {Criterion::kRandom, "random"},
}};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double require_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw StrategyFormatError(std::string("missing field '") + key + "'");
  const auto& v = doc[key];
  if (!v.is_number()) throw StrategyFormatError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw StrategyFormatError(std::string("field '") + key + "' is not finite");
  return d;
}

}  // namespace

std::string_view to_string(Criterion c) {
  for (const auto& [k, name] : kCriterionNames) {
    if (k == c) return name;
  }
  return "unknown";
}

std::string_view to_string(PruneMode m) { return m == PruneMode::kCnn ? "cnn" : "vit"; }

std::optional<Criterion> parse_criterion(std::string_view text) {
  for (const auto& [k, name] : kCriterionNames) {
    if (name == text) return k;
  }
  if (text == "l1") return Criterion::kL1Norm;
  if (text == "l2") return Criterion::kL2Norm;
  return std::nullopt;
}

std::optional<PruneMode> parse_prune_mode(std::string_view text) {
  if (text == "cnn") return PruneMode::kCnn;
  if (text == "vit") return PruneMode::kVit;
  return std::nullopt;
}

bool is_valid_round_to(int round_to) {
  return round_to == 1 || round_to == 2 || round_to == 4 || round_to == 8 || round_to == 16;
}

double GroupMultipliers::get(MultiplierKey key) const {
  switch (key) {
    case MultiplierKey::kMlp:
      return mlp;
    case MultiplierKey::kQkv:
      return qkv;
    case MultiplierKey::kProj:
      return proj;
    case MultiplierKey::kHead:
      return head;
    case MultiplierKey::kCnnChannel:
      return 0.0;
  }
  return 0.0;
}

void GroupMultipliers::set(MultiplierKey key, double value) {
  switch (key) {
    case MultiplierKey::kMlp:
      mlp = value;
      break;
    case MultiplierKey::kQkv:
      qkv = value;
      break;
    case MultiplierKey::kProj:
      proj = value;
      break;
    case MultiplierKey::kHead:
      head = value;
      break;
    case MultiplierKey::kCnnChannel:
      break;
  }
}

double Strategy::effective_ratio(MultiplierKey key) const {
  double r = 0.0;
  if (mode == PruneMode::kCnn) {
    r = key == MultiplierKey::kHead ? 0.0 : channel_pruning_ratio;
  } else {
    r = base_ratio * multipliers.get(key);
  }
  return std::clamp(r, 0.0, kMaxEffectiveRatio);
}

std::vector<double> Strategy::components() const {
  if (mode == PruneMode::kCnn) return {channel_pruning_ratio};
  return {base_ratio, multipliers.mlp, multipliers.qkv, multipliers.proj, multipliers.head};
}

void Strategy::set_component(std::size_t index, double value) {
  if (mode == PruneMode::kCnn) {
    if (index != 0) throw std::out_of_range("CNN strategy has one component");
    channel_pruning_ratio = value;
    return;
  }
  switch (index) {
    case 0:
      base_ratio = value;
      break;
    case 1:
      multipliers.mlp = value;
      break;
    case 2:
      multipliers.qkv = value;
      break;
    case 3:
      multipliers.proj = value;
      break;
    case 4:
      multipliers.head = value;
      break;
    default:
      throw std::out_of_range("ViT strategy has five components");
  }
}

bool Strategy::same_configuration(const Strategy& other) const {
  return criterion == other.criterion && mode == other.mode && round_to == other.round_to &&
         global_pruning == other.global_pruning && components() == other.components();
}

std::string signature(const Strategy& s, double quantum) {
  std::string sig(to_string(s.criterion));
  sig += "/" + std::string(to_string(s.mode)) + "/rt" + std::to_string(s.round_to);
  sig += s.global_pruning ? "/g" : "/l";
  for (double c : s.components()) {
    const auto q = static_cast<long long>(std::llround(c / quantum));
    sig += "/" + std::to_string(q);
  }
  return sig;
}

std::string summarize(const Strategy& s) {
  std::string out(to_string(s.criterion));
  if (s.mode == PruneMode::kCnn) {
    out += " r=" + fixed(s.channel_pruning_ratio, 3);
  } else {
    out += " base=" + fixed(s.base_ratio, 3) + " mlp=" + fixed(s.multipliers.mlp, 2) +
           " qkv=" + fixed(s.multipliers.qkv, 2) + " proj=" + fixed(s.multipliers.proj, 2) +
           " head=" + fixed(s.multipliers.head, 2);
  }
  out += " rt=" + std::to_string(s.round_to);
  out += s.global_pruning ? " global" : " local";
  return out;
}

nlohmann::ordered_json to_json(const Strategy& s) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(s.mode));
  j["importance_criterion"] = std::string(to_string(s.criterion));
  if (s.mode == PruneMode::kCnn) {
    j["channel_pruning_ratio"] = s.channel_pruning_ratio;
  } else {
    j["base_ratio"] = s.base_ratio;
    j["isomorphic_group_ratios"] = {
        {"mlp_multiplier", s.multipliers.mlp},
        {"qkv_multiplier", s.multipliers.qkv},
        {"proj_multiplier", s.multipliers.proj},
        {"head_multiplier", s.multipliers.head},
    };
  }
  j["round_to"] = s.round_to;
  j["global_pruning"] = s.global_pruning;
  if (s.expected_achieved_macs) {
    j["expected_achieved_macs"] = *s.expected_achieved_macs;
  } else {
    j["expected_achieved_macs"] = nullptr;
  }
  j["rationale"] = s.rationale;
  return j;
}

Strategy strategy_from_json(const nlohmann::json& doc, double default_base_ratio) {
  if (!doc.is_object()) throw StrategyFormatError("strategy must be a JSON object");
  Strategy s;

  const bool has_vit = doc.contains("isomorphic_group_ratios");
  const bool has_cnn = doc.contains("channel_pruning_ratio");
  if (doc.contains("mode") && doc["mode"].is_string()) {
    const auto m = parse_prune_mode(doc["mode"].get<std::string>());
    if (!m) throw StrategyFormatError("unknown mode '" + doc["mode"].get<std::string>() + "'");
    s.mode = *m;
  } else if (has_vit) {
    s.mode = PruneMode::kVit;
  } else if (has_cnn) {
    s.mode = PruneMode::kCnn;
  } else {
    throw StrategyFormatError("missing 'channel_pruning_ratio' or 'isomorphic_group_ratios'");
  }

  if (!doc.contains("importance_criterion") || !doc["importance_criterion"].is_string()) {
    throw StrategyFormatError("missing field 'importance_criterion'");
  }
  const auto crit_text = doc["importance_criterion"].get<std::string>();
  const auto crit = parse_criterion(crit_text);
  if (!crit) throw StrategyFormatError("unknown importance_criterion '" + crit_text + "'");
  s.criterion = *crit;

  const double rt = require_number(doc, "round_to");
  if (rt != std::floor(rt) || rt < 1 || rt > 1024) {
    throw StrategyFormatError("round_to must be a positive integer");
  }
  s.round_to = static_cast<int>(rt);

  if (s.mode == PruneMode::kCnn) {
    s.channel_pruning_ratio = require_number(doc, "channel_pruning_ratio");
  } else {
    if (!has_vit || !doc["isomorphic_group_ratios"].is_object()) {
      throw StrategyFormatError("missing object 'isomorphic_group_ratios'");
    }
    const auto& g = doc["isomorphic_group_ratios"];
    s.multipliers.mlp = require_number(g, "mlp_multiplier");
    s.multipliers.qkv = require_number(g, "qkv_multiplier");
    s.multipliers.proj = require_number(g, "proj_multiplier");
    s.multipliers.head = require_number(g, "head_multiplier");
    s.base_ratio = doc.contains("base_ratio") && doc["base_ratio"].is_number()
                       ? doc["base_ratio"].get<double>()
                       : default_base_ratio;
  }

  if (doc.contains("global_pruning") && doc["global_pruning"].is_boolean()) {
    s.global_pruning = doc["global_pruning"].get<bool>();
  }
  if (doc.contains("expected_achieved_macs") && doc["expected_achieved_macs"].is_number()) {
    s.expected_achieved_macs = doc["expected_achieved_macs"].get<double>();
  }
  if (doc.contains("rationale") && doc["rationale"].is_string()) {
    s.rationale = doc["rationale"].get<std::string>();
  }
  return s;
}

}  // namespace macprune

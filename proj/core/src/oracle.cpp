// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "macprune/json_extract.hpp"
#include "macprune/network.hpp"

namespace macprune {

namespace {

constexpr double kKnobMax = kMaxEffectiveRatio;
constexpr double kMaxStep = 0.15;
constexpr double kHeuristicRepeatStep = 0.001;
constexpr double kLlmRepeatStep = 0.05;
constexpr int kMaxRepeatNudges = 200;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string pct_text(double v) { return fmt("%g", v) + "%"; }

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

bool repeats(const Strategy& s, const std::vector<RevisionRecord>& history) {
  const std::string sig = signature(s);
  return std::any_of(history.begin(), history.end(),
                     [&](const RevisionRecord& r) { return signature(r.strategy) == sig; });
}

void shift_knob(Strategy& s, double step) {
  if (s.mode == PruneMode::kCnn) {
    s.channel_pruning_ratio = std::clamp(round3(s.channel_pruning_ratio + step), 0.0, kKnobMax);
  } else {
    s.base_ratio = std::clamp(round3(s.base_ratio + step), 0.0, kKnobMax);
  }
}

Direction last_direction(const std::vector<RevisionRecord>& history) {
  if (history.empty()) return Direction::kHold;
  const auto& last = history.back();
  if (last.status == RecordStatus::kCollapsed || last.mac_status == MacStatus::kUndershoot) {
    return Direction::kLessAggressive;
  }
  if (last.mac_status == MacStatus::kOvershoot) return Direction::kMoreAggressive;
  return Direction::kHold;
}

Proposal finalize_with_step(Strategy s, const std::vector<RevisionRecord>& history, const GuidanceNote& guidance,
                            const OracleContext& ctx, double step) {
  const SafetyContext sc{ctx.target_ratio(), guidance.danger_zones, ctx.predicted_reduction_pct};
  Proposal p;
  for (int i = 0; i < kMaxRepeatNudges; ++i) {
    SafetyResult r = validate_and_correct(s, sc, ctx.limits);
    p.log.insert(p.log.end(), r.log.begin(), r.log.end());
    s = std::move(r.strategy);
    if (!repeats(s, history)) {
      p.strategy = std::move(s);
      return p;
    }
    p.log.push_back("repeat-avoidance: " + summarize(s) + " was already tried");
    const double before = HeuristicOracle::knob(s);
    shift_knob(s, step);
    if (HeuristicOracle::knob(s) == before) {
      step = -step;
      shift_knob(s, step);
    }
  }
  throw UnrecoverableStrategy("no untried strategy near " + summarize(s));
}

struct Point {
  double x;
  double macs;
  const RevisionRecord* rec;
};

}  // namespace

std::string format_giga(double macs) {
  std::string s = fmt(std::abs(macs) >= 1e8 ? "%.3f" : "%.6f", macs / 1e9);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

// ---- profile ----------------------------------------------------------------

ProfileReport build_profile(const ModelGraph& graph, const DependencyGraph& deps,
                            const std::vector<IsomorphicGroup>& groups, const std::string& model_arch) {
  ProfileReport p;
  p.model_arch = model_arch;
  p.dataset_profile = graph.dataset_profile();
  p.mode = graph.has_attention() ? PruneMode::kVit : PruneMode::kCnn;
  p.groups = groups;
  p.macs = count_model_macs(graph, groups);
  p.baseline_macs = static_cast<double>(p.macs.total);
  p.num_classes = num_classes(graph);
  p.input_size = graph.node(graph.input_index()).out_h;
  for (const auto& n : graph.nodes()) {
    if (n.kind == LayerKind::kInput) continue;
    if (!n.prunable) p.constraints.push_back("'" + n.id + "' (" + std::string(to_string(n.kind)) + ") is never pruned");
    if (n.kind == LayerKind::kQkvProjection) {
      p.constraints.push_back("'" + n.id + "' out_channels must stay divisible by 3 x heads (" +
                              std::to_string(n.num_heads) + "); head_dim >= 8");
    }
    if (n.is_depthwise()) p.constraints.push_back("'" + n.id + "' is depthwise; its input and output prune together");
  }
  int locked = 0;
  for (const auto& g : deps.coupled_groups) {
    if (!g.prunable) ++locked;
  }
  p.constraints.push_back(std::to_string(deps.coupled_groups.size()) + " coupled channel groups, " +
                          std::to_string(locked) + " locked");
  switch (p.dataset_profile) {
    case DatasetProfile::kImagenetLike:
      p.dataset_notes = "imagenet-like: conservative limits, projection and heads preserved";
      break;
    case DatasetProfile::kCifarLike:
      p.dataset_notes = "cifar-like: aggressive pruning tolerated";
      break;
    case DatasetProfile::kSynthetic:
      p.dataset_notes = "synthetic: desk-scale Gaussian blobs, cifar-like limits";
      break;
  }
  return p;
}

std::string render_profile_summary(const ProfileReport& p) {
  std::ostringstream out;
  out << "Model: " << p.model_arch << " (" << to_string(p.mode) << " mode)\n";
  out << "Dataset: " << to_string(p.dataset_profile) << ", " << p.num_classes << " classes, " << p.input_size << "x"
      << p.input_size << " input\n";
  out << "Baseline MACs: " << format_giga(p.baseline_macs) << "G (" << p.macs.total << ")\n";
  std::vector<std::pair<MacCount, std::string>> top;
  for (const auto& [id, m] : p.macs.per_layer) top.emplace_back(m, id);
  std::stable_sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  out << "Largest layers:\n";
  for (std::size_t i = 0; i < top.size() && i < 8; ++i) {
    const double share = p.macs.total > 0 ? 100.0 * static_cast<double>(top[i].first) / p.macs.total : 0.0;
    out << "  " << top[i].second << ": " << top[i].first << " (" << fmt("%.1f", share) << "%)\n";
  }
  out << "Isomorphic groups:\n";
  for (const auto& g : p.groups) {
    out << "  [" << to_string(g.multiplier_key) << "] " << g.signature << " x" << g.members.size() << ": "
        << p.macs.per_group.at(g.signature) << " MACs\n";
  }
  out << "Constraints:\n";
  for (const auto& c : p.constraints) out << "  - " << c << "\n";
  out << "Notes: " << p.dataset_notes << "\n";
  return out.str();
}

// ---- guidance / history -----------------------------------------------------

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kMoreAggressive:
      return "more-aggressive";
    case Direction::kLessAggressive:
      return "less-aggressive";
    case Direction::kHold:
      return "hold";
  }
  return "hold";
}

std::string render_guidance(const GuidanceNote& g, double target_macs, const ToleranceBand& band) {
  std::ostringstream out;
  out << "Acceptable MAC range: " << format_giga(target_macs * (1.0 - band.undershoot_pct / 100.0)) << "G - "
      << format_giga(target_macs * (1.0 + band.overshoot_pct / 100.0)) << "G\n";
  out << "Direction: " << to_string(g.direction) << "\n";
  if (g.delta_r) {
    out << "Delta_r: " << fmt("%+.4f", *g.delta_r / 1e9) << "G (" << (*g.delta_r < 0 ? "improving" : "not improving")
        << ")\n";
  }
  out << "Stagnation: " << (g.stagnation ? "yes" : "no") << "\n";
  if (!g.error_buckets.empty()) {
    out << "Error buckets:";
    for (const auto& [k, v] : g.error_buckets) out << " " << k << "=" << v;
    out << "\n";
  }
  if (!g.tuning_order.empty()) {
    out << "Tuning order:";
    for (const auto& t : g.tuning_order) out << " " << t;
    out << "\n";
  }
  for (const auto& z : g.danger_zones) {
    out << "Danger zone: " << to_string(z.criterion) << " rt=" << z.round_to;
    for (double c : z.components) out << " " << fmt("%.3f", c);
    out << " (+/-" << fmt("%.2f", z.radius) << ")\n";
  }
  if (g.should_stop) out << "Stop: " << g.stop_reason.value_or("") << "\n";
  return out.str();
}

std::string render_history_table(const std::vector<RevisionRecord>& history) {
  if (history.empty()) return "(no revisions yet)\n";
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-4s %-52s %9s %8s %8s %-10s\n", "Rev", "Strategy", "MACs(G)", "Err%",
                "Acc%", "Status");
  out << line;
  for (const auto& r : history) {
    std::string acc = "-";
    if (r.inline_ft_acc) {
      acc = fmt("%.2f", *r.inline_ft_acc);
    } else if (r.zero_shot_acc) {
      acc = fmt("%.2f", *r.zero_shot_acc) + "z";
    }
    std::snprintf(line, sizeof(line), "%-4d %-52s %9.3f %+8.1f %8s %-10s\n", r.index, summarize(r.strategy).c_str(),
                  r.achieved_macs / 1e9, r.mac_error_pct, acc.c_str(), std::string(to_string(r.status)).c_str());
    out << line;
  }
  return out.str();
}

// ---- usage ------------------------------------------------------------------

double OracleUsage::estimated_cost() const {
  return static_cast<double>(input_tokens) * rate_in_per_million / 1e6 +
         static_cast<double>(output_tokens) * rate_out_per_million / 1e6;
}

void OracleUsage::add(const OracleUsage& d) {
  calls += d.calls;
  input_tokens += d.input_tokens;
  output_tokens += d.output_tokens;
}

nlohmann::ordered_json to_json(const OracleUsage& u) {
  return {{"calls", u.calls},
          {"input_tokens", u.input_tokens},
          {"output_tokens", u.output_tokens},
          {"rate_in_per_million", u.rate_in_per_million},
          {"rate_out_per_million", u.rate_out_per_million},
          {"estimated_cost", u.estimated_cost()}};
}

// ---- shared finalization ------------------------------------------------------

Proposal finalize_proposal(Strategy s, const std::vector<RevisionRecord>& history, const GuidanceNote& guidance,
                           const OracleContext& ctx, Direction nudge) {
  return finalize_with_step(std::move(s), history, guidance, ctx,
                            nudge == Direction::kLessAggressive ? -kHeuristicRepeatStep : kHeuristicRepeatStep);
}

// ---- heuristic --------------------------------------------------------------

double HeuristicOracle::knob(const Strategy& s) {
  return s.mode == PruneMode::kCnn ? s.channel_pruning_ratio : s.base_ratio;
}

Strategy HeuristicOracle::with_knob(const OracleContext& ctx, double x) {
  Strategy s;
  s.mode = ctx.mode;
  s.criterion = ctx.criterion;
  s.round_to = ctx.round_to;
  s.global_pruning = ctx.global_pruning;
  x = std::clamp(round3(x), 0.0, kKnobMax);
  if (ctx.mode == PruneMode::kCnn) {
    s.channel_pruning_ratio = x;
  } else {
    s.base_ratio = x;
    s.multipliers.mlp = 1.0;
    s.multipliers.qkv = 0.5;
    s.multipliers.proj = ctx.limits.proj_allowed ? 0.5 : 0.0;
    s.multipliers.head = 0.0;
  }
  return s;
}

Proposal HeuristicOracle::propose(const std::vector<RevisionRecord>& history, const ProfileReport&,
                                  const GuidanceNote& guidance, const OracleContext& ctx) {
  const double mb = ctx.baseline_macs;
  const double target = ctx.target_macs;
  const double lower = target * (1.0 - ctx.band.undershoot_pct / 100.0);
  const double upper = target * (1.0 + ctx.band.overshoot_pct / 100.0);
  const double aim = 0.5 * (lower + upper);

  std::vector<Point> over, under, valid;
  for (const auto& r : history) {
    if (r.strategy.mode != ctx.mode) continue;
    const Point p{knob(r.strategy), r.achieved_macs, &r};
    if (r.status == RecordStatus::kCollapsed || r.mac_status == MacStatus::kUndershoot) {
      under.push_back(p);
    } else if (r.mac_status == MacStatus::kOvershoot) {
      over.push_back(p);
    } else {
      valid.push_back(p);
    }
  }
  std::optional<double> x_over, x_under;
  const Point* p_over = nullptr;
  const Point* p_under = nullptr;
  for (const auto& p : over) {
    if (!x_over || p.x > *x_over) {
      x_over = p.x;
      p_over = &p;
    }
  }
  for (const auto& p : under) {
    if (!x_under || p.x < *x_under) {
      x_under = p.x;
      p_under = &p;
    }
  }
  auto inside_bracket = [&](double x) {
    return (!x_over || x > *x_over + 1e-12) && (!x_under || x < *x_under - 1e-12) && x >= 0.0 && x <= kKnobMax;
  };

  std::optional<double> choice;
  std::string why;
  if (history.empty() || (over.empty() && under.empty() && valid.empty())) {
    choice = 1.0 - std::sqrt(std::clamp(target / mb, 0.0, 1.0));
    why = "quadratic model inversion";
  }
  if (!choice && !valid.empty()) {
    const Point* best = &valid.front();
    for (const auto& p : valid) {
      const double a = p.rec->inline_ft_acc.value_or(p.rec->zero_shot_acc.value_or(0.0));
      const double b = best->rec->inline_ft_acc.value_or(best->rec->zero_shot_acc.value_or(0.0));
      if (a > b) best = &p;
    }
    for (int k = 1; k <= 10 && !choice; ++k) {
      for (double sign : {1.0, -1.0}) {
        const double x = round3(best->x + sign * 0.005 * k);
        if (!inside_bracket(x)) continue;
        const Strategy s = with_knob(ctx, x);
        if (repeats(s, history) || in_danger_zone(s, guidance.danger_zones)) continue;
        choice = x;
        why = "local exploration around the best valid revision";
        break;
      }
    }
  }
  if (!choice && p_over && p_under) {
    const double w = p_under->x - p_over->x;
    double x = p_over->x + (aim - p_over->macs) * (p_under->x - p_over->x) / (p_under->macs - p_over->macs);
    x = std::clamp(x, p_over->x + 0.1 * w, p_under->x - 0.1 * w);
    choice = x;
    why = "secant inside the bracketing revisions";
  } else if (!choice && p_under) {
    const double k = p_under->macs / (mb * std::pow(1.0 - p_under->x, 2));
    double x = 1.0 - std::sqrt(std::clamp(aim / (k * mb), 0.0, 1.0));
    x = std::max(std::min(x, p_under->x - 0.005), p_under->x - kMaxStep);
    choice = x;
    why = "recalibrated quadratic step toward fewer removals";
  } else if (!choice && p_over) {
    const double k = p_over->macs / (mb * std::pow(1.0 - p_over->x, 2));
    double x = 1.0 - std::sqrt(std::clamp(aim / (k * mb), 0.0, 1.0));
    x = std::min(std::max(x, p_over->x + 0.005), p_over->x + kMaxStep);
    choice = x;
    why = "recalibrated quadratic step toward more removals";
  } else if (!choice) {
    choice = valid.empty() ? 0.0 : valid.back().x + 0.001;
    why = "exploration exhausted; minimal perturbation";
  }

  Strategy s = with_knob(ctx, *choice);
  s.rationale = why;
  Direction nudge = last_direction(history);
  if (p_under && !p_over) nudge = Direction::kLessAggressive;
  try {
    return finalize_proposal(s, history, guidance, ctx, nudge);
  } catch (const UnrecoverableStrategy& e) {
    Strategy fb = fallback_preset(ctx.limits, std::clamp(ctx.target_ratio(), 1e-6, 1.0), ctx.mode);
    fb.round_to = ctx.round_to;
    Proposal p = finalize_proposal(fb, history, guidance, ctx, nudge);
    p.used_fallback = true;
    p.event = std::string("fallback: ") + e.what();
    return p;
  }
}

// ---- LLM ----------------------------------------------------------------------

PromptContext analysis_prompt_context(const ProfileReport& profile, const OracleContext& ctx) {
  return {{"target_macs", format_giga(ctx.target_macs)},
          {"baseline_macs", format_giga(profile.baseline_macs)},
          {"macs_overshoot_tolerance_pct", pct_text(ctx.band.overshoot_pct)},
          {"macs_undershoot_tolerance_pct", pct_text(ctx.band.undershoot_pct)},
          {"round_to", std::to_string(ctx.round_to)}};
}

PromptContext profiling_prompt_context(const ProfileReport& profile, const OracleContext& ctx) {
  return {{"model_arch", profile.model_arch},
          {"dataset", std::string(to_string(profile.dataset_profile))},
          {"num_classes", std::to_string(profile.num_classes)},
          {"input_size", std::to_string(profile.input_size)},
          {"baseline_macs", format_giga(profile.baseline_macs)},
          {"target_macs", format_giga(ctx.target_macs)},
          {"macs_overshoot_tolerance_pct", pct_text(ctx.band.overshoot_pct)},
          {"macs_undershoot_tolerance_pct", pct_text(ctx.band.undershoot_pct)},
          {"mac_reduction_needed", fmt("%.1f", 100.0 * (1.0 - ctx.target_macs / profile.baseline_macs))},
          {"undershoot_lower_bound", format_giga(ctx.target_macs * (1.0 - ctx.band.undershoot_pct / 100.0))},
          {"overshoot_upper_bound", format_giga(ctx.target_macs * (1.0 + ctx.band.overshoot_pct / 100.0))}};
}

PromptContext master_prompt_context(const ProfileReport& profile, const OracleContext& ctx,
                                    const std::vector<RevisionRecord>& history) {
  return {{"target_macs", format_giga(ctx.target_macs)},
          {"baseline_macs", format_giga(profile.baseline_macs)},
          {"macs_overshoot_tolerance_pct", pct_text(ctx.band.overshoot_pct)},
          {"macs_undershoot_tolerance_pct", pct_text(ctx.band.undershoot_pct)},
          {"mac_reduction_needed", fmt("%.1f", 100.0 * (1.0 - ctx.target_macs / profile.baseline_macs))},
          {"min_target_macs_g", format_giga(ctx.target_macs * (1.0 - ctx.band.undershoot_pct / 100.0))},
          {"max_target_macs_g", format_giga(ctx.target_macs * (1.0 + ctx.band.overshoot_pct / 100.0))},
          {"previous_strategies", render_history_table(history)}};
}

std::vector<ChatMessage> build_analysis_messages(const std::vector<RevisionRecord>& history,
                                                 const ProfileReport& profile, const GuidanceNote& guidance,
                                                 const OracleContext& ctx) {
  const PromptTemplate tpl = ctx.mode == PruneMode::kVit ? PromptTemplate::kAnalysisVit : PromptTemplate::kAnalysisCnn;
  std::string user = render_profile_summary(profile);
  user += "\nPruning history:\n" + render_history_table(history);
  user += "\nMaster guidance:\n" + render_guidance(guidance, ctx.target_macs, ctx.band);
  user += "\nRespond with the JSON object only.\n";
  return {{"system", render_prompt(tpl, analysis_prompt_context(profile, ctx))}, {"user", user}};
}

LlmOracle::LlmOracle(std::shared_ptr<ChatClient> client, EndpointConfig config)
    : client_(std::move(client)), config_(std::move(config)) {}

Proposal LlmOracle::propose(const std::vector<RevisionRecord>& history, const ProfileReport& profile,
                            const GuidanceNote& guidance, const OracleContext& ctx) {
  ChatRequest req;
  req.model = config_.model;
  req.messages = build_analysis_messages(history, profile, guidance, ctx);
  req.temperature = 0.0;
  req.max_tokens = config_.max_tokens;
  const ChatResponse resp = client_->complete(req);

  OracleUsage usage;
  usage.calls = 1;
  usage.input_tokens = resp.input_tokens;
  usage.output_tokens = resp.output_tokens;
  usage.rate_in_per_million = config_.rate_in_per_million;
  usage.rate_out_per_million = config_.rate_out_per_million;

  const double t = std::clamp(ctx.target_ratio(), 1e-6, 1.0);
  const auto doc = extract_json_object(resp.content, [](const nlohmann::json& j) {
    return j.contains("importance_criterion") &&
           (j.contains("channel_pruning_ratio") || j.contains("isomorphic_group_ratios"));
  });
  Strategy s;
  std::string event;
  if (!doc) {
    event = "fallback: no strategy JSON object in response";
  } else {
    try {
      s = strategy_from_json(*doc, t);
      if (s.mode != ctx.mode) throw StrategyFormatError("strategy mode does not match the run mode");
    } catch (const StrategyFormatError& e) {
      event = std::string("fallback: ") + e.what();
    }
  }
  const bool fallback = !event.empty();
  if (fallback) s = fallback_preset(ctx.limits, t, ctx.mode);

  const Direction nudge = last_direction(history);
  const double step = nudge == Direction::kLessAggressive ? -kLlmRepeatStep : kLlmRepeatStep;
  Proposal p;
  try {
    p = finalize_with_step(s, history, guidance, ctx, step);
  } catch (const UnrecoverableStrategy& e) {
    p = finalize_with_step(fallback_preset(ctx.limits, t, ctx.mode), history, guidance, ctx, step);
    event = std::string("fallback: ") + e.what();
  }
  p.used_fallback = !event.empty();
  p.event = event;
  p.usage_delta = usage;
  p.raw_response = resp.content;
  return p;
}

// ---- replay -------------------------------------------------------------------

Proposal ReplayOracle::propose(const std::vector<RevisionRecord>&, const ProfileReport&, const GuidanceNote&,
                               const OracleContext&) {
  if (next_ >= strategies_.size()) throw OracleUnavailable("replay source exhausted");
  Proposal p;
  p.strategy = strategies_[next_++];
  p.event = "replay";
  return p;
}

}  // namespace macprune

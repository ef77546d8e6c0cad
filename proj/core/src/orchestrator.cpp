// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "macprune/pruner.hpp"

namespace macprune {

std::string_view to_string(SearchPhase p) {
  switch (p) {
    case SearchPhase::kSearching:
      return "searching";
    case SearchPhase::kExtended:
      return "extended";
    case SearchPhase::kDone:
      return "done";
  }
  return "searching";
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kTargetAchieved:
      return "target-achieved";
    case StopReason::kConverged:
      return "converged";
    case StopReason::kCycling:
      return "cycling";
    case StopReason::kMaxIterations:
      return "max-iterations";
  }
  return "max-iterations";
}

std::optional<StopReason> parse_stop_reason(std::string_view text) {
  for (auto r : {StopReason::kTargetAchieved, StopReason::kConverged, StopReason::kCycling,
                 StopReason::kMaxIterations}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

nlohmann::ordered_json to_json(const SearchState& s) {
  nlohmann::ordered_json j;
  j["phase"] = to_string(s.phase);
  j["extended_remaining"] = s.extended_remaining;
  j["extended_budget"] = s.extended_budget;
  j["r_max"] = s.r_max;
  j["stop_reason"] = s.stop_reason ? nlohmann::ordered_json(to_string(*s.stop_reason)) : nlohmann::ordered_json();
  j["aborted"] = s.aborted;
  if (s.aborted) j["abort_message"] = s.abort_message;
  j["profiling_seconds"] = s.profiling_seconds;
  auto cands = nlohmann::ordered_json::array();
  for (const auto& c : s.candidates) {
    cands.push_back({{"revision", c.revision},
                     {"achieved_macs", c.achieved_macs},
                     {"mac_error_pct", c.mac_error_pct},
                     {"accuracy", c.accuracy},
                     {"strategy", to_json(c.strategy)}});
  }
  j["candidates"] = std::move(cands);
  auto hist = nlohmann::ordered_json::array();
  for (const auto& r : s.history) hist.push_back(to_json(r));
  j["history"] = std::move(hist);
  return j;
}

SearchState state_from_json(const nlohmann::json& doc) {
  SearchState s;
  const std::string phase = doc.value("phase", "searching");
  for (auto p : {SearchPhase::kSearching, SearchPhase::kExtended, SearchPhase::kDone}) {
    if (to_string(p) == phase) s.phase = p;
  }
  s.extended_remaining = doc.value("extended_remaining", 0);
  s.extended_budget = doc.value("extended_budget", kExtendedBudget);
  s.r_max = doc.value("r_max", kDefaultMaxRevisions);
  if (doc.contains("stop_reason") && doc["stop_reason"].is_string()) {
    s.stop_reason = parse_stop_reason(doc["stop_reason"].get<std::string>());
  }
  s.aborted = doc.value("aborted", false);
  s.abort_message = doc.value("abort_message", "");
  s.profiling_seconds = doc.value("profiling_seconds", 0.0);
  for (const auto& h : doc.value("history", nlohmann::json::array())) s.history.push_back(record_from_json(h));
  for (const auto& c : doc.value("candidates", nlohmann::json::array())) {
    Candidate k;
    k.revision = c.at("revision").get<int>();
    k.achieved_macs = c.at("achieved_macs").get<double>();
    k.mac_error_pct = c.at("mac_error_pct").get<double>();
    k.accuracy = c.at("accuracy").get<double>();
    k.strategy = strategy_from_json(c.at("strategy"));
    s.candidates.push_back(std::move(k));
  }
  return s;
}

std::string error_bucket(double mac_error_pct) {
  const double e = std::abs(mac_error_pct);
  if (e < 5.0) return "<5%";
  if (e < 15.0) return "5-15%";
  if (e < 30.0) return "15-30%";
  return ">30%";
}

GuidanceNote master_guidance(const SearchState& state, double target_macs, const ToleranceBand& band,
                             const SafetyLimits& limits) {
  GuidanceNote g;
  const auto& h = state.history;
  const auto [stop, reason] = should_stop(state, band);
  g.should_stop = stop;
  if (reason) g.stop_reason = std::string(to_string(*reason));

  auto delta = [&](std::size_t i) {
    return std::abs(h[i].achieved_macs - target_macs) - std::abs(h[i - 1].achieved_macs - target_macs);
  };
  if (h.size() >= 2) g.delta_r = delta(h.size() - 1);
  if (h.size() > static_cast<std::size_t>(kStagnationWindow)) {
    g.stagnation = true;
    for (std::size_t i = h.size() - kStagnationWindow; i < h.size(); ++i) {
      if (delta(i) < 0.0) g.stagnation = false;
    }
  }

  if (!h.empty()) {
    const auto& last = h.back();
    if (last.mac_status == MacStatus::kOvershoot) {
      g.direction = Direction::kMoreAggressive;
    } else if (last.mac_status == MacStatus::kUndershoot || last.status == RecordStatus::kCollapsed) {
      g.direction = Direction::kLessAggressive;
    }
  }
  for (const auto& r : h) {
    if (r.status == RecordStatus::kCollapsed) g.danger_zones.push_back(zone_around(r.strategy, limits.danger_radius));
    ++g.error_buckets[error_bucket(r.mac_error_pct)];
  }
  const PruneMode mode = h.empty() ? PruneMode::kCnn : h.back().strategy.mode;
  if (mode == PruneMode::kVit) {
    g.tuning_order = {"base_ratio", "mlp"};
    g.tuning_order.push_back("qkv");
    if (limits.proj_allowed) g.tuning_order.push_back("proj");
    if (limits.head_allowed) g.tuning_order.push_back("head");
  } else {
    g.tuning_order = {"channel_pruning_ratio"};
  }
  return g;
}

std::pair<bool, std::optional<StopReason>> should_stop(const SearchState& state, const ToleranceBand&) {
  const auto& h = state.history;
  if (state.phase == SearchPhase::kExtended && state.extended_remaining <= 0) {
    return {true, StopReason::kTargetAchieved};
  }
  if (h.size() >= static_cast<std::size_t>(kConvergenceWindow)) {
    bool all_valid = true;
    double lo = 1e300;
    double hi = -1e300;
    for (std::size_t i = h.size() - kConvergenceWindow; i < h.size(); ++i) {
      if (h[i].mac_status != MacStatus::kValid || !h[i].inline_ft_acc) {
        all_valid = false;
        break;
      }
      lo = std::min(lo, *h[i].inline_ft_acc);
      hi = std::max(hi, *h[i].inline_ft_acc);
    }
    if (all_valid && hi - lo < kConvergenceRange) return {true, StopReason::kConverged};
  }
  if (!h.empty()) {
    const std::string sig = signature(h.back().strategy);
    const auto n = std::count_if(h.begin(), h.end(), [&](const RevisionRecord& r) { return signature(r.strategy) == sig; });
    if (n > kCycleRecurrences) return {true, StopReason::kCycling};
  }
  if (static_cast<int>(h.size()) >= state.r_max) return {true, StopReason::kMaxIterations};
  return {false, std::nullopt};
}

const Candidate& select_best(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_best: no candidates");
  const Candidate* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.accuracy > best->accuracy) {
      best = &c;
    } else if (c.accuracy == best->accuracy) {
      const double a = std::abs(c.mac_error_pct);
      const double b = std::abs(best->mac_error_pct);
      if (a < b || (a == b && c.revision < best->revision)) best = &c;
    }
  }
  return *best;
}

std::optional<std::size_t> nearest_record(const std::vector<RevisionRecord>& history) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (!best || std::abs(history[i].mac_error_pct) < std::abs(history[*best].mac_error_pct)) best = i;
  }
  return best;
}

RecordStatus classify(MacStatus mac_status, std::optional<double> zero_shot_acc, const SafetyLimits& limits) {
  if (zero_shot_acc && detect_collapse(*zero_shot_acc, limits)) return RecordStatus::kCollapsed;
  switch (mac_status) {
    case MacStatus::kValid:
      return RecordStatus::kValid;
    case MacStatus::kOvershoot:
      return RecordStatus::kOvershoot;
    case MacStatus::kUndershoot:
      return RecordStatus::kUndershoot;
  }
  return RecordStatus::kValid;
}

void admit_record(SearchState& st, RevisionRecord r, std::shared_ptr<const WeightedNet> net) {
  bool first = false;
  if (r.mac_status == MacStatus::kValid && r.inline_ft_acc) {
    st.candidates.push_back({r.index, r.achieved_macs, r.mac_error_pct, *r.inline_ft_acc, r.strategy, std::move(net)});
    first = st.candidates.size() == 1;
  }
  if (first) {
    st.phase = SearchPhase::kExtended;
    st.extended_remaining = st.extended_budget;
  } else if (st.phase == SearchPhase::kExtended) {
    st.extended_remaining = std::max(0, st.extended_remaining - 1);
  }
  st.history.push_back(std::move(r));
}

SearchState replay_state(const std::vector<RevisionRecord>& history, double target_macs, const ToleranceBand& band,
                         const SafetyLimits& limits) {
  SearchState st;
  for (RevisionRecord r : history) {
    r.mac_error_pct = mac_error_pct(r.achieved_macs, target_macs);
    r.mac_status = within_tolerance(r.achieved_macs, target_macs, band);
    r.status = classify(r.mac_status, r.zero_shot_acc, limits);
    if (r.mac_status != MacStatus::kValid) r.inline_ft_acc.reset();
    admit_record(st, std::move(r));
  }
  st.stop_reason = should_stop(st, band).second;
  st.phase = SearchPhase::kDone;
  return st;
}

namespace {

class PhaseClock {
 public:
  explicit PhaseClock(TimingMode mode) : mode_(mode), start_(std::chrono::steady_clock::now()) {}
  // Wall mode returns the elapsed time since construction or the last call.
  double lap(double virtual_seconds) {
    const auto now = std::chrono::steady_clock::now();
    const double wall = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return mode_ == TimingMode::kWall ? wall : virtual_seconds;
  }

 private:
  TimingMode mode_;
  std::chrono::steady_clock::time_point start_;
};

// Virtual analysis time: a fixed turn cost plus decoding at 50 tokens/s.
double virtual_analysis_seconds(const OracleUsage& u) {
  return 0.05 + static_cast<double>(u.input_tokens) / 2000.0 + static_cast<double>(u.output_tokens) / 50.0;
}

}  // namespace

SearchResult run_search(SearchBackend& backend, StrategyOracle& oracle, const SearchOptions& opt) {
  if (opt.r_max < 1) throw std::invalid_argument("r_max must be at least 1");
  if (opt.extended_budget < 0 || opt.extended_budget > kExtendedBudget) {
    throw std::invalid_argument("extended budget must be in [0, 30]");
  }
  if (!(opt.band.overshoot_pct >= 0.0) || !(opt.band.undershoot_pct >= 0.0) || opt.band.undershoot_pct >= 100.0) {
    throw std::invalid_argument("tolerance band must be non-negative with undershoot below 100%");
  }
  SearchResult res;
  SearchState& st = res.state;
  st.r_max = opt.r_max;
  st.extended_budget = opt.extended_budget;

  PhaseClock clock(opt.timing);
  res.profile = backend.profile();
  st.profiling_seconds = clock.lap(backend.profiling_seconds());
  const double base = res.profile.baseline_macs;
  if (!(opt.target_macs > 0.0) || opt.target_macs >= base) {
    throw InfeasibleTarget("target MACs must lie in (0, baseline " + format_giga(base) + "G)");
  }
  const double floor_macs = backend.min_achievable_macs();
  if (opt.target_macs * (1.0 + opt.band.overshoot_pct / 100.0) < floor_macs) {
    throw InfeasibleTarget("band upper bound " + format_giga(opt.target_macs * (1.0 + opt.band.overshoot_pct / 100.0)) +
                           "G is below the minimum achievable " + format_giga(floor_macs) + "G");
  }

  OracleContext& ctx = res.context;
  ctx.baseline_macs = base;
  ctx.target_macs = opt.target_macs;
  ctx.band = opt.band;
  ctx.mode = res.profile.mode;
  ctx.limits = opt.limits.value_or(SafetyLimits::for_profile(res.profile.dataset_profile));
  ctx.criterion = opt.criterion;
  ctx.round_to = opt.round_to;
  ctx.global_pruning = opt.global_pruning;
  ctx.predicted_reduction_pct = backend.reduction_predictor();

  HistoryLog log;
  if (!opt.history_path.empty()) log = HistoryLog(opt.history_path, opt.resume.empty());

  for (const auto& r : opt.resume) admit_record(st, r);

  while (true) {
    const auto [stop, reason] = should_stop(st, opt.band);
    if (stop) {
      st.stop_reason = reason;
      break;
    }
    const GuidanceNote guidance = master_guidance(st, opt.target_macs, opt.band, ctx.limits);

    clock.lap(0.0);
    Proposal p;
    try {
      p = oracle.propose(st.history, res.profile, guidance, ctx);
    } catch (const OracleUnavailable& e) {
      if (oracle.name() == "replay") {
        st.stop_reason = StopReason::kMaxIterations;
      } else {
        st.aborted = true;
        st.abort_message = e.what();
      }
      break;
    }
    RevisionRecord rec;
    rec.index = static_cast<int>(st.history.size()) + 1;
    rec.phase_seconds[std::string(to_string(Phase::kAnalysis))] = clock.lap(virtual_analysis_seconds(p.usage_delta));

    PruneEvaluation ev;
    try {
      ev = backend.prune_and_evaluate(p.strategy);
    } catch (const InfeasibleStrategy& e) {
      p.log.push_back(std::string("infeasible: ") + e.what());
      const double t = std::clamp(ctx.target_ratio(), 1e-6, 1.0);
      Proposal fb = finalize_proposal(fallback_preset(ctx.limits, t, ctx.mode), st.history, guidance, ctx,
                                      Direction::kLessAggressive);
      p.strategy = fb.strategy;
      p.log.insert(p.log.end(), fb.log.begin(), fb.log.end());
      p.event = std::string("fallback: ") + e.what();
      ev = backend.prune_and_evaluate(p.strategy);
    }
    const double prune_wall = clock.lap(ev.pruning_seconds + ev.evaluation_seconds);
    if (opt.timing == TimingMode::kWall) {
      rec.phase_seconds[std::string(to_string(Phase::kPruning))] = prune_wall;
      rec.phase_seconds[std::string(to_string(Phase::kEvaluation))] = 0.0;
    } else {
      rec.phase_seconds[std::string(to_string(Phase::kPruning))] = ev.pruning_seconds;
      rec.phase_seconds[std::string(to_string(Phase::kEvaluation))] = ev.evaluation_seconds;
    }

    rec.strategy = p.strategy;
    rec.achieved_macs = ev.achieved_macs;
    rec.mac_error_pct = mac_error_pct(ev.achieved_macs, opt.target_macs);
    rec.mac_status = within_tolerance(ev.achieved_macs, opt.target_macs, opt.band);
    rec.zero_shot_acc = ev.zero_shot_acc;
    rec.status = classify(rec.mac_status, rec.zero_shot_acc, ctx.limits);
    rec.corrections = p.log;
    rec.oracle_event = p.event;
    rec.input_tokens = p.usage_delta.input_tokens;
    rec.output_tokens = p.usage_delta.output_tokens;
    res.usage.add(p.usage_delta);

    std::shared_ptr<const WeightedNet> tuned;
    double ft_seconds = 0.0;
    if (rec.mac_status == MacStatus::kValid) {
      clock.lap(0.0);
      FinetuneResult ft = backend.finetune(ev);
      ft_seconds = clock.lap(ft.seconds);
      if (ft.diverged || !std::isfinite(ft.accuracy)) {
        rec.status = RecordStatus::kCollapsed;
        rec.corrections.push_back("inline fine-tuning diverged");
      } else {
        rec.inline_ft_acc = ft.accuracy;
        tuned = std::move(ft.net);
      }
    }
    rec.phase_seconds[std::string(to_string(Phase::kFinetune))] = ft_seconds;

    if (log.is_open()) log.append(rec);
    admit_record(st, std::move(rec), std::move(tuned));
    if (opt.on_revision) opt.on_revision(st.history.back(), st);
  }

  st.phase = SearchPhase::kDone;
  if (!st.candidates.empty()) {
    res.best = select_best(st.candidates);
  } else {
    res.nearest = nearest_record(st.history);
  }
  return res;
}

}  // namespace macprune

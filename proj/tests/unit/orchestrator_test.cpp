// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdio>
#include <deque>
#include <filesystem>

#include "macprune/net_backend.hpp"
#include "macprune/orchestrator.hpp"
#include "macprune/pruner.hpp"

namespace macprune {
namespace {

Strategy cnn(double r) {
  Strategy s;
  s.channel_pruning_ratio = r;
  s.round_to = 2;
  return s;
}

RevisionRecord record(int index, double ratio, double macs, MacStatus ms, std::optional<double> acc = std::nullopt) {
  RevisionRecord r;
  r.index = index;
  r.strategy = cnn(ratio);
  r.achieved_macs = macs;
  r.mac_status = ms;
  r.status = ms == MacStatus::kValid ? RecordStatus::kValid
                                     : (ms == MacStatus::kOvershoot ? RecordStatus::kOvershoot : RecordStatus::kUndershoot);
  r.inline_ft_acc = acc;
  return r;
}

// Hands out a fixed list of strategies, then reports itself unavailable.
class ScriptedOracle : public StrategyOracle {
 public:
  explicit ScriptedOracle(std::deque<Strategy> s, std::string name = "scripted")
      : script_(std::move(s)), name_(std::move(name)) {}
  Proposal propose(const std::vector<RevisionRecord>&, const ProfileReport&, const GuidanceNote& g,
                   const OracleContext&) override {
    last_guidance = g;
    if (script_.empty()) throw OracleUnavailable("script exhausted");
    Proposal p;
    p.strategy = script_.front();
    script_.pop_front();
    return p;
  }
  std::string name() const override { return name_; }
  GuidanceNote last_guidance;

 private:
  std::deque<Strategy> script_;
  std::string name_;
};

// Surface backend with optional failure injection.
class FaultyBackend : public SurfaceBackend {
 public:
  explicit FaultyBackend(SurfaceParams p) : SurfaceBackend(p) {}
  PruneEvaluation prune_and_evaluate(const Strategy& s) override {
    ++prunes;
    if (infeasible_above && s.channel_pruning_ratio > *infeasible_above) throw InfeasibleStrategy("too thin");
    return SurfaceBackend::prune_and_evaluate(s);
  }
  FinetuneResult finetune(const PruneEvaluation& p) override {
    FinetuneResult r = SurfaceBackend::finetune(p);
    if (diverge) r.diverged = true;
    return r;
  }
  std::optional<double> infeasible_above;
  bool diverge = false;
  int prunes = 0;
};

SurfaceParams surface() {
  SurfaceParams p;
  p.baseline_macs = 4e9;
  p.exponent = 2.0;
  p.base_accuracy = 80.0;
  return p;
}

SearchOptions options(double target, int r_max = 40, int budget = 5) {
  SearchOptions o;
  o.target_macs = target;
  o.r_max = r_max;
  o.extended_budget = budget;
  return o;
}

TEST(ShouldStop, MaxIterations) {
  SearchState st;
  st.r_max = 2;
  st.history = {record(1, 0.1, 1, MacStatus::kOvershoot), record(2, 0.2, 1, MacStatus::kOvershoot)};
  EXPECT_EQ(should_stop(st, {}).second, StopReason::kMaxIterations);
}

TEST(ShouldStop, ConvergedNeedsThreeValidCloseAccuracies) {
  SearchState st;
  st.history = {record(1, 0.30, 1, MacStatus::kValid, 70.0), record(2, 0.31, 1, MacStatus::kValid, 70.2),
                record(3, 0.32, 1, MacStatus::kValid, 70.4)};
  EXPECT_EQ(should_stop(st, {}).second, StopReason::kConverged);
  st.history[2].inline_ft_acc = 70.6;
  EXPECT_FALSE(should_stop(st, {}).first);
}

TEST(ShouldStop, CyclingAfterThirdRepeat) {
  SearchState st;
  st.history = {record(1, 0.3, 1, MacStatus::kOvershoot), record(2, 0.3, 1, MacStatus::kOvershoot)};
  EXPECT_FALSE(should_stop(st, {}).first);
  st.history.push_back(record(3, 0.3, 1, MacStatus::kOvershoot));
  EXPECT_EQ(should_stop(st, {}).second, StopReason::kCycling);
}

TEST(ShouldStop, ExtendedBudgetExhausted) {
  SearchState st;
  st.phase = SearchPhase::kExtended;
  st.extended_remaining = 0;
  EXPECT_EQ(should_stop(st, {}).second, StopReason::kTargetAchieved);
}

TEST(SelectBest, AccuracyThenErrorThenRevision) {
  std::vector<Candidate> c(3);
  c[0] = {1, 0, -5.0, 70.0, {}, nullptr};
  c[1] = {2, 0, 2.0, 71.0, {}, nullptr};
  c[2] = {3, 0, -1.0, 71.0, {}, nullptr};
  EXPECT_EQ(select_best(c).revision, 3);
  c[2].mac_error_pct = 2.0;
  EXPECT_EQ(select_best(c).revision, 2);
  EXPECT_THROW(select_best({}), std::invalid_argument);
}

TEST(Classify, CollapseOverridesMacStatus) {
  const auto l = SafetyLimits::for_profile(DatasetProfile::kImagenetLike);
  EXPECT_EQ(classify(MacStatus::kValid, 0.5, l), RecordStatus::kCollapsed);
  EXPECT_EQ(classify(MacStatus::kUndershoot, 2.61, l), RecordStatus::kUndershoot);
  EXPECT_EQ(classify(MacStatus::kOvershoot, std::nullopt, l), RecordStatus::kOvershoot);
}

TEST(Guidance, DirectionDangerZonesAndStagnation) {
  SearchState st;
  auto collapsed = record(1, 0.65, 0.64e9, MacStatus::kUndershoot);
  collapsed.status = RecordStatus::kCollapsed;
  collapsed.mac_error_pct = -69.0;
  st.history = {collapsed};
  for (int i = 2; i <= 5; ++i) {
    auto r = record(i, 0.40 + 0.01 * i, 1.4e9, MacStatus::kUndershoot);
    r.mac_error_pct = -32.0;
    st.history.push_back(r);
  }
  const GuidanceNote g = master_guidance(st, 2.06e9, {}, SafetyLimits::for_profile(DatasetProfile::kImagenetLike));
  EXPECT_EQ(g.direction, Direction::kLessAggressive);
  ASSERT_EQ(g.danger_zones.size(), 1u);
  EXPECT_TRUE(g.stagnation);
  ASSERT_TRUE(g.delta_r);
  EXPECT_DOUBLE_EQ(*g.delta_r, 0.0);
  EXPECT_EQ(g.error_buckets.at(">30%"), 5);
  EXPECT_EQ(error_bucket(-4.9), "<5%");
  EXPECT_EQ(error_bucket(12.0), "5-15%");
}

TEST(Search, HeuristicReachesBandAndNeverAcceptsOvershoot) {
  SurfaceBackend backend(surface());
  HeuristicOracle oracle;
  const SearchResult r = run_search(backend, oracle, options(2e9));
  ASSERT_TRUE(r.found_valid());
  EXPECT_EQ(r.state.stop_reason, StopReason::kTargetAchieved);
  for (const auto& c : r.state.candidates) {
    EXPECT_LE(c.achieved_macs, 2e9 * 1.05 + 1e-6);
    EXPECT_GE(c.achieved_macs, 2e9 * 0.85 - 1e-6);
  }
  for (const auto& h : r.state.history) {
    if (h.mac_status != MacStatus::kValid) EXPECT_FALSE(h.inline_ft_acc);
  }
}

TEST(Search, ExtendedPhaseRunsBudgetAfterFirstValid) {
  // valid, overshoot, valid, overshoot, ...: never three valid in a row
  std::deque<Strategy> script;
  for (int i = 0; i < 10; ++i) script.push_back(cnn(i % 2 ? 0.10 + 0.01 * i : 0.30 + 0.005 * i));
  SurfaceBackend backend(surface());
  ScriptedOracle oracle(script);
  const SearchResult r = run_search(backend, oracle, options(2e9, 40, 3));
  ASSERT_TRUE(r.found_valid());
  EXPECT_EQ(r.state.history.size(), 4u);
  EXPECT_EQ(r.state.stop_reason, StopReason::kTargetAchieved);
  EXPECT_EQ(r.state.phase, SearchPhase::kDone);
}

TEST(Search, OracleFailureAbortsWithState) {
  SurfaceBackend backend(surface());
  ScriptedOracle oracle({cnn(0.05)});
  const SearchResult r = run_search(backend, oracle, options(2e9));
  EXPECT_TRUE(r.state.aborted);
  EXPECT_NE(r.state.abort_message.find("exhausted"), std::string::npos);
  EXPECT_EQ(r.state.history.size(), 1u);
  EXPECT_FALSE(r.found_valid());
  ASSERT_TRUE(r.nearest);
}

TEST(Search, ReplayExhaustionEndsNormally) {
  SurfaceBackend backend(surface());
  ScriptedOracle oracle({cnn(0.05)}, "replay");
  const SearchResult r = run_search(backend, oracle, options(2e9));
  EXPECT_FALSE(r.state.aborted);
  EXPECT_EQ(r.state.stop_reason, StopReason::kMaxIterations);
}

TEST(Search, InfeasibleStrategyFallsBackToPreset) {
  FaultyBackend backend(surface());
  backend.infeasible_above = 0.6;
  ScriptedOracle oracle({cnn(0.7)});
  const SearchResult r = run_search(backend, oracle, options(2e9, 1));
  ASSERT_EQ(r.state.history.size(), 1u);
  EXPECT_NE(r.state.history[0].oracle_event.find("fallback"), std::string::npos);
  EXPECT_LE(r.state.history[0].strategy.channel_pruning_ratio, 0.6);
  EXPECT_EQ(backend.prunes, 2);
}

TEST(Search, DivergedFinetuneCountsAsCollapse) {
  FaultyBackend backend(surface());
  backend.diverge = true;
  ScriptedOracle oracle({cnn(0.29)});
  const SearchResult r = run_search(backend, oracle, options(2e9, 1));
  ASSERT_EQ(r.state.history.size(), 1u);
  EXPECT_EQ(r.state.history[0].status, RecordStatus::kCollapsed);
  EXPECT_FALSE(r.state.history[0].inline_ft_acc);
  EXPECT_FALSE(r.found_valid());
}

TEST(Search, RejectsInfeasibleTargetsAndOptions) {
  SurfaceBackend backend(surface());
  HeuristicOracle oracle;
  EXPECT_THROW(run_search(backend, oracle, options(5e9)), InfeasibleTarget);
  EXPECT_THROW(run_search(backend, oracle, options(1e6)), InfeasibleTarget);
  EXPECT_THROW(run_search(backend, oracle, options(2e9, 0)), std::invalid_argument);
  EXPECT_THROW(run_search(backend, oracle, options(2e9, 10, 31)), std::invalid_argument);
}

TEST(Search, HistoryLogAndResumeReproduceTheRun) {
  const auto dir = std::filesystem::temp_directory_path() / "macprune_orch_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "history.jsonl").string();

  SearchOptions full = options(1.2e9, 40, 4);
  full.history_path = path;
  SurfaceBackend b1(surface());
  HeuristicOracle o1;
  const SearchResult a = run_search(b1, o1, full);
  const auto logged = read_history(path);
  ASSERT_EQ(logged.size(), a.state.history.size());

  SearchOptions resumed = options(1.2e9, 40, 4);
  resumed.resume.assign(logged.begin(), logged.begin() + 2);
  SurfaceBackend b2(surface());
  HeuristicOracle o2;
  const SearchResult b = run_search(b2, o2, resumed);
  ASSERT_EQ(b.state.history.size(), a.state.history.size());
  for (std::size_t i = 0; i < a.state.history.size(); ++i) {
    EXPECT_EQ(signature(a.state.history[i].strategy), signature(b.state.history[i].strategy)) << i;
    EXPECT_EQ(a.state.history[i].achieved_macs, b.state.history[i].achieved_macs);
  }
  std::filesystem::remove_all(dir);
}

TEST(Search, StateJsonRoundTrip) {
  SurfaceBackend backend(surface());
  HeuristicOracle oracle;
  const SearchResult r = run_search(backend, oracle, options(2e9));
  const SearchState back = state_from_json(nlohmann::json::parse(to_json(r.state).dump()));
  EXPECT_EQ(back.history.size(), r.state.history.size());
  EXPECT_EQ(back.candidates.size(), r.state.candidates.size());
  EXPECT_EQ(back.stop_reason, r.state.stop_reason);
  EXPECT_EQ(to_json(back).dump(), to_json(r.state).dump());
}

TEST(Replay, StatusesAreRecomputed) {
  std::vector<RevisionRecord> h = {record(1, 0.35, 1.65e9, MacStatus::kValid, 10.0),
                                   record(2, 0.32, 1.782e9, MacStatus::kUndershoot, 37.12)};
  h[0].zero_shot_acc = 0.11;
  const SearchState st =
      replay_state(h, 2.06e9, {}, SafetyLimits::for_profile(DatasetProfile::kImagenetLike));
  EXPECT_EQ(st.history[0].mac_status, MacStatus::kUndershoot);
  EXPECT_EQ(st.history[0].status, RecordStatus::kCollapsed);
  EXPECT_FALSE(st.history[0].inline_ft_acc);
  EXPECT_EQ(st.history[1].status, RecordStatus::kValid);
  EXPECT_EQ(st.candidates.size(), 1u);
  EXPECT_EQ(st.phase, SearchPhase::kDone);
}

TEST(Surface, MonotoneInKnob) {
  SurfaceBackend b(surface());
  double prev = 1e300;
  for (double x = 0.0; x <= 0.8; x += 0.05) {
    const double m = b.macs_at(x);
    EXPECT_LE(m, prev);
    prev = m;
  }
}

}  // namespace
}  // namespace macprune

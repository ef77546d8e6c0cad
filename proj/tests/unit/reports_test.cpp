// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <regex>

#include "macprune/net_backend.hpp"
#include "macprune/reports.hpp"

namespace macprune {
namespace {

std::string replay_path() { return std::string(MACPRUNE_TEST_DATA_DIR) + "/fixtures/replay/resnet50_history.jsonl"; }

SearchState replayed() {
  return replay_state(read_history(replay_path()), 2.06e9, parse_band("+5/-15"),
                      SafetyLimits::for_profile(DatasetProfile::kImagenetLike));
}

TEST(Reports, RecordedRunOutcomeRow) {
  const SearchState st = replayed();
  const OutcomeCounts c = count_outcomes(st.history);
  EXPECT_EQ(c.valid, 22);
  EXPECT_EQ(c.undershoot, 9);
  EXPECT_EQ(c.overshoot, 0);
  EXPECT_EQ(count_with_pct(c.valid, c.total()), "22 (71%)");
  EXPECT_EQ(count_with_pct(c.overshoot, c.total()), "0 (0%)");
  const std::string text = outcome_text(c);
  EXPECT_TRUE(std::regex_search(text, std::regex("Within Tolerance +22 \\(71%\\)")));
}

TEST(Reports, FirstTwentyRevisionStatuses) {
  const SearchState st = replayed();
  for (int i = 0; i < 8; ++i) EXPECT_EQ(st.history[i].mac_status, MacStatus::kUndershoot) << i + 1;
  EXPECT_EQ(st.history[8].mac_status, MacStatus::kValid);
  EXPECT_EQ(st.history[9].mac_status, MacStatus::kValid);
}

TEST(Reports, EmptyHistoryProducesZeroTables) {
  ReportInputs in;
  in.target_macs = 1e9;
  const auto files = build_reports(in);
  for (const char* f : {"report.txt", "report.json", "trajectory.csv", "timing.csv", "outcomes.csv", "usage.csv"}) {
    EXPECT_TRUE(files.count(f)) << f;
  }
  EXPECT_NE(files.at("report.txt").find("0 (0%)"), std::string::npos);
  const auto j = nlohmann::json::parse(files.at("report.json"));
  EXPECT_EQ(j["outcomes"]["within_tolerance"], 0);
}

TEST(Reports, PercentagesSumTo100) {
  SurfaceParams p;
  p.baseline_macs = 3e9;
  SurfaceBackend backend(p);
  HeuristicOracle oracle;
  SearchOptions o;
  o.target_macs = 1e9;
  o.extended_budget = 6;
  const SearchResult r = run_search(backend, oracle, o);
  const PhaseTiming t = total_timing(r.state.history, r.state.profiling_seconds);
  double sum = 0.0;
  for (const auto& [phase, s] : t.seconds) sum += t.pct(phase);
  EXPECT_NEAR(sum, 100.0, 0.1);
  const OutcomeCounts c = count_outcomes(r.state.history);
  EXPECT_EQ(c.total(), static_cast<int>(r.state.history.size()));
}

TEST(Reports, CsvHasHeaderAndOneRowPerRevision) {
  const SearchState st = replayed();
  const std::string csv = trajectory_csv(st.history);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 32);
  EXPECT_EQ(csv.rfind("revision,", 0), 0u);
}

TEST(Reports, WriteFailsForUnwritableDirectory) {
  EXPECT_THROW(write_reports({{"a.txt", "x"}}, "/proc/definitely/not/here"), std::runtime_error);
  const auto dir = std::filesystem::temp_directory_path() / "macprune_reports_test";
  write_reports({{"a.txt", "x"}}, dir.string());
  EXPECT_TRUE(std::filesystem::exists(dir / "a.txt"));
  std::filesystem::remove_all(dir);
}

TEST(Reports, UsageTableShowsCost) {
  OracleUsage u;
  u.calls = 3;
  u.input_tokens = 1000;
  u.output_tokens = 100;
  EXPECT_NE(usage_text(u).find("$0.0045"), std::string::npos);
}

}  // namespace
}  // namespace macprune

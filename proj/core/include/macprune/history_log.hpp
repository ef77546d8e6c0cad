// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Revision records and the append-only JSONL history log.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "macprune/macprof.hpp"
#include "macprune/strategy.hpp"

namespace macprune {

enum class RecordStatus { kValid, kUndershoot, kOvershoot, kCollapsed };
std::string_view to_string(RecordStatus s);
std::optional<RecordStatus> parse_record_status(std::string_view text);

enum class Phase { kProfiling, kAnalysis, kPruning, kFinetune, kEvaluation };
inline constexpr Phase kAllPhases[] = {Phase::kProfiling, Phase::kAnalysis, Phase::kPruning, Phase::kFinetune,
                                       Phase::kEvaluation};
std::string_view to_string(Phase p);

struct RevisionRecord {
  int index = 0;  // 1-based
  Strategy strategy;
  double achieved_macs = 0.0;
  double mac_error_pct = 0.0;
  std::optional<double> zero_shot_acc;
  std::optional<double> inline_ft_acc;
  RecordStatus status = RecordStatus::kValid;
  MacStatus mac_status = MacStatus::kValid;
  std::map<std::string, double> phase_seconds;
  std::vector<std::string> corrections;  // safety and repeat-avoidance log
  std::string oracle_event;              // e.g. fallback reason
  std::string origin;                // "recorded" / "interpolated" for replayed data
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

nlohmann::ordered_json to_json(const RevisionRecord& r);
RevisionRecord record_from_json(const nlohmann::json& doc);

// Opens for append (or truncates); every append writes one line and flushes.
class HistoryLog {
 public:
  HistoryLog() = default;
  HistoryLog(const std::string& path, bool truncate);
  void append(const RevisionRecord& r);
  bool is_open() const { return out_.is_open(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

// Blank lines are skipped; a malformed line throws std::runtime_error naming it.
std::vector<RevisionRecord> read_history(const std::string& path);

}  // namespace macprune

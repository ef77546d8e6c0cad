// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Trajectory, timing, outcome-distribution and usage reports.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macprune/history_log.hpp"
#include "macprune/oracle.hpp"
#include "macprune/orchestrator.hpp"

namespace macprune {

struct OutcomeCounts {
  int valid = 0;
  int undershoot = 0;
  int overshoot = 0;
  int collapsed = 0;  // subset of the above, by zero-shot accuracy
  int total() const { return valid + undershoot + overshoot; }
};

// Counts by MAC status.
OutcomeCounts count_outcomes(const std::vector<RevisionRecord>& history);
// "22 (71%)"
std::string count_with_pct(int count, int total);

struct PhaseTiming {
  std::map<std::string, double> seconds;  // every phase present
  double total = 0.0;
  double pct(const std::string& phase) const;
};

PhaseTiming total_timing(const std::vector<RevisionRecord>& history, double profiling_seconds);

std::string trajectory_text(const std::vector<RevisionRecord>& history);
std::string trajectory_csv(const std::vector<RevisionRecord>& history);
std::string timing_text(const PhaseTiming& t);
std::string timing_csv(const PhaseTiming& t);
std::string outcome_text(const OutcomeCounts& c);
std::string outcome_csv(const OutcomeCounts& c);
std::string usage_text(const OracleUsage& u);
std::string usage_csv(const OracleUsage& u);

struct ReportInputs {
  SearchState state;
  OracleUsage usage;
  double target_macs = 0.0;
  ToleranceBand band;
  std::string oracle_name;
};

// File name -> contents; names are report.txt, report.json and one CSV per table.
std::map<std::string, std::string> build_reports(const ReportInputs& in);

// Throws std::runtime_error when the directory cannot be created or written.
void write_reports(const std::map<std::string, std::string>& files, const std::string& outdir);

}  // namespace macprune

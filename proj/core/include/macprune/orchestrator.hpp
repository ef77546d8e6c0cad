// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Master-agent state machine and the revision loop.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "macprune/history_log.hpp"
#include "macprune/network.hpp"
#include "macprune/oracle.hpp"
#include "macprune/safety.hpp"

namespace macprune {

enum class SearchPhase { kSearching, kExtended, kDone };
std::string_view to_string(SearchPhase p);

enum class StopReason { kTargetAchieved, kConverged, kCycling, kMaxIterations };
std::string_view to_string(StopReason r);
std::optional<StopReason> parse_stop_reason(std::string_view text);

inline constexpr int kExtendedBudget = 30;
inline constexpr int kDefaultMaxRevisions = 1000;
inline constexpr int kConvergenceWindow = 3;
inline constexpr double kConvergenceRange = 0.5;  // accuracy points
inline constexpr int kCycleRecurrences = 2;
inline constexpr int kStagnationWindow = 3;

struct Candidate {
  int revision = 0;
  double achieved_macs = 0.0;
  double mac_error_pct = 0.0;
  double accuracy = 0.0;  // inline fine-tuned
  Strategy strategy;
  std::shared_ptr<const WeightedNet> net;  // null for surrogate backends or resumed runs
};

struct SearchState {
  std::vector<RevisionRecord> history;
  std::vector<Candidate> candidates;
  SearchPhase phase = SearchPhase::kSearching;
  int extended_remaining = 0;
  int extended_budget = kExtendedBudget;
  int r_max = kDefaultMaxRevisions;
  std::optional<StopReason> stop_reason;
  bool aborted = false;
  std::string abort_message;
  double profiling_seconds = 0.0;
};

nlohmann::ordered_json to_json(const SearchState& s);
// Candidates come back without nets.
SearchState state_from_json(const nlohmann::json& doc);

// Error buckets by |error|: "<5%", "5-15%", "15-30%", ">30%".
std::string error_bucket(double mac_error_pct);

GuidanceNote master_guidance(const SearchState& state, double target_macs, const ToleranceBand& band,
                             const SafetyLimits& limits);

std::pair<bool, std::optional<StopReason>> should_stop(const SearchState& state, const ToleranceBand& band);

// Highest accuracy, then smaller |error|, then earlier revision. Throws on empty input.
const Candidate& select_best(const std::vector<Candidate>& candidates);

// Nearest |M - target| in history (earliest on ties); nullopt when empty.
std::optional<std::size_t> nearest_record(const std::vector<RevisionRecord>& history);

// status: collapsed when the zero-shot accuracy collapses, else the MAC status.
RecordStatus classify(MacStatus mac_status, std::optional<double> zero_shot_acc, const SafetyLimits& limits);

struct PruneEvaluation {
  double achieved_macs = 0.0;
  double zero_shot_acc = 0.0;
  double pruning_seconds = 0.0;     // virtual
  double evaluation_seconds = 0.0;  // virtual
  std::shared_ptr<const WeightedNet> pruned;
};

struct FinetuneResult {
  double accuracy = 0.0;
  bool diverged = false;
  double seconds = 0.0;  // virtual, includes the post-tuning evaluation
  std::shared_ptr<const WeightedNet> net;
};

class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual ProfileReport profile() = 0;
  virtual double profiling_seconds() const { return 0.0; }
  // Smallest MAC count any admissible strategy reaches.
  virtual double min_achievable_macs() = 0;
  // Always prunes the pristine baseline.
  virtual PruneEvaluation prune_and_evaluate(const Strategy& s) = 0;
  virtual FinetuneResult finetune(const PruneEvaluation& pruned) = 0;
  // Stage-3 safety input; empty when unsupported.
  virtual std::function<double(const Strategy&)> reduction_predictor() { return {}; }
};

class InfeasibleTarget : public std::invalid_argument {
 public:
  explicit InfeasibleTarget(const std::string& what) : std::invalid_argument(what) {}
};

enum class TimingMode { kVirtual, kWall };

struct SearchOptions {
  double target_macs = 0.0;
  ToleranceBand band;
  int r_max = kDefaultMaxRevisions;
  int extended_budget = kExtendedBudget;
  std::optional<SafetyLimits> limits;  // defaults to the graph's dataset profile
  Criterion criterion = Criterion::kTaylor;
  int round_to = 2;
  bool global_pruning = true;
  std::string model_arch = "model";
  TimingMode timing = TimingMode::kVirtual;
  std::string history_path;  // empty: no persistent log
  // Records from an earlier log; the loop continues after them.
  std::vector<RevisionRecord> resume;
  // Called after every logged revision.
  std::function<void(const RevisionRecord&, const SearchState&)> on_revision;
};

struct SearchResult {
  SearchState state;
  ProfileReport profile;
  OracleContext context;
  OracleUsage usage;
  std::optional<Candidate> best;
  std::optional<std::size_t> nearest;  // history index, used when no candidate exists

  bool found_valid() const { return best.has_value(); }
};

SearchResult run_search(SearchBackend& backend, StrategyOracle& oracle, const SearchOptions& options);

// Appends to history and applies the candidate / extended-phase bookkeeping.
void admit_record(SearchState& state, RevisionRecord record, std::shared_ptr<const WeightedNet> net = nullptr);

// Recomputes error, MAC status and status of every record against the
// target and band, then rebuilds candidates and phase as the loop would.
SearchState replay_state(const std::vector<RevisionRecord>& history, double target_macs, const ToleranceBand& band,
                         const SafetyLimits& limits);

}  // namespace macprune

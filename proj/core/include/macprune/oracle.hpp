// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Strategy oracles: a deterministic history-aware heuristic, an LLM-backed
// proposer over a chat endpoint, and a replay source.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macprune/chat_client.hpp"
#include "macprune/dependency.hpp"
#include "macprune/history_log.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "macprune/prompts.hpp"
#include "macprune/safety.hpp"
#include "macprune/strategy.hpp"

namespace macprune {

struct ProfileReport {
  std::string model_arch;
  DatasetProfile dataset_profile = DatasetProfile::kSynthetic;
  PruneMode mode = PruneMode::kCnn;
  double baseline_macs = 0.0;
  MacReport macs;
  std::vector<IsomorphicGroup> groups;
  std::vector<std::string> constraints;
  std::string dataset_notes;
  int num_classes = 0;
  int input_size = 0;  // spatial side of the input
};

ProfileReport build_profile(const ModelGraph& graph, const DependencyGraph& deps,
                            const std::vector<IsomorphicGroup>& groups, const std::string& model_arch);
std::string render_profile_summary(const ProfileReport& p);

enum class Direction { kMoreAggressive, kLessAggressive, kHold };
std::string_view to_string(Direction d);

struct GuidanceNote {
  bool should_stop = false;
  std::optional<std::string> stop_reason;
  Direction direction = Direction::kHold;
  std::vector<std::string> tuning_order;
  std::vector<DangerZone> danger_zones;
  bool stagnation = false;
  std::optional<double> delta_r;  // MACs; negative means improving
  std::map<std::string, int> error_buckets;
};

std::string render_guidance(const GuidanceNote& g, double target_macs, const ToleranceBand& band);

// Compact table: revision, strategy, achieved MACs, error, accuracy.
std::string render_history_table(const std::vector<RevisionRecord>& history);

struct OracleUsage {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double rate_in_per_million = 3.0;
  double rate_out_per_million = 15.0;

  double estimated_cost() const;
  void add(const OracleUsage& delta);
};

nlohmann::ordered_json to_json(const OracleUsage& u);

struct OracleContext {
  double baseline_macs = 0.0;
  double target_macs = 0.0;
  ToleranceBand band;
  PruneMode mode = PruneMode::kCnn;
  SafetyLimits limits;
  Criterion criterion = Criterion::kTaylor;
  int round_to = 2;
  bool global_pruning = true;
  // Exact predicted MAC reduction in percent (stage-3 input); optional.
  std::function<double(const Strategy&)> predicted_reduction_pct;

  double target_ratio() const { return 1.0 - target_macs / baseline_macs; }
};

struct Proposal {
  Strategy strategy;
  std::vector<std::string> log;
  std::string event;  // non-empty when a fallback or recovery path was taken
  bool used_fallback = false;
  OracleUsage usage_delta;
  std::string raw_response;
};

class StrategyOracle {
 public:
  virtual ~StrategyOracle() = default;
  virtual Proposal propose(const std::vector<RevisionRecord>& history, const ProfileReport& profile,
                           const GuidanceNote& guidance, const OracleContext& context) = 0;
  virtual std::string name() const = 0;
};

// Safety correction plus repeat avoidance, shared by every oracle.
Proposal finalize_proposal(Strategy s, const std::vector<RevisionRecord>& history, const GuidanceNote& guidance,
                           const OracleContext& context, Direction nudge);

class HeuristicOracle : public StrategyOracle {
 public:
  Proposal propose(const std::vector<RevisionRecord>& history, const ProfileReport& profile,
                   const GuidanceNote& guidance, const OracleContext& context) override;
  std::string name() const override { return "heuristic"; }

  // The scalar knob the heuristic drives: channel ratio (CNN) or base ratio (ViT).
  static double knob(const Strategy& s);
  static Strategy with_knob(const OracleContext& ctx, double x);
};

// Messages sent for one analysis request.
std::vector<ChatMessage> build_analysis_messages(const std::vector<RevisionRecord>& history,
                                                 const ProfileReport& profile, const GuidanceNote& guidance,
                                                 const OracleContext& context);
PromptContext analysis_prompt_context(const ProfileReport& profile, const OracleContext& context);
PromptContext profiling_prompt_context(const ProfileReport& profile, const OracleContext& context);
PromptContext master_prompt_context(const ProfileReport& profile, const OracleContext& context,
                                    const std::vector<RevisionRecord>& history);

class LlmOracle : public StrategyOracle {
 public:
  LlmOracle(std::shared_ptr<ChatClient> client, EndpointConfig config);
  Proposal propose(const std::vector<RevisionRecord>& history, const ProfileReport& profile,
                   const GuidanceNote& guidance, const OracleContext& context) override;
  std::string name() const override { return "llm"; }

 private:
  std::shared_ptr<ChatClient> client_;
  EndpointConfig config_;
};

// Re-issues recorded strategies in order; throws OracleUnavailable when exhausted.
class ReplayOracle : public StrategyOracle {
 public:
  explicit ReplayOracle(std::vector<Strategy> strategies) : strategies_(std::move(strategies)) {}
  Proposal propose(const std::vector<RevisionRecord>& history, const ProfileReport& profile,
                   const GuidanceNote& guidance, const OracleContext& context) override;
  std::string name() const override { return "replay"; }

 private:
  std::vector<Strategy> strategies_;
  std::size_t next_ = 0;
};

// "2.06" for 2.06e9; three decimals (six below 0.1G), trailing zeros trimmed.
std::string format_giga(double macs);

}  // namespace macprune

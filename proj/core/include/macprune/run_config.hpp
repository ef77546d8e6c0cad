// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration document and the end-to-end search driver.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "macprune/chat_client.hpp"
#include "macprune/dataset.hpp"
#include "macprune/orchestrator.hpp"
#include "macprune/safety.hpp"
#include "macprune/trainer.hpp"

namespace macprune {

enum class OracleKind { kHeuristic, kLlm, kReplay };
std::string_view to_string(OracleKind k);

struct RunConfig {
  // A spec file path, or "fixture:<name>".
  std::string model = "fixture:mini-resnet";
  std::string model_arch;  // defaults to the model field
  DatasetParams dataset;   // channels/height/width follow the model input
  double target_macs = 0.0;
  ToleranceBand band;
  int r_max = kDefaultMaxRevisions;
  int extended_budget = kExtendedBudget;
  OracleKind oracle = OracleKind::kHeuristic;
  EndpointConfig endpoint;
  std::string canned_dir;      // llm oracle: offline responses instead of HTTP
  std::string replay_history;  // replay oracle: JSONL history whose strategies are re-issued
  Criterion criterion = Criterion::kTaylor;
  int round_to = 2;
  bool global_pruning = true;
  TrainConfig pretrain = TrainConfig::pretrain();
  std::optional<TrainConfig> finetune;  // defaults by architecture
  std::uint64_t init_seed = 3;
  std::uint64_t score_seed = 1;
  int calibration_samples = 64;
  TimingMode timing = TimingMode::kVirtual;
  nlohmann::json safety_overrides = nlohmann::json::object();
  std::string output_dir = "macprune-out";
};

// Relative paths resolve against `base_dir`. Throws std::invalid_argument on bad fields.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& c);

ModelGraph load_model(const std::string& model);

struct RunOutcome {
  SearchResult result;
  double baseline_accuracy = 0.0;
  std::string history_path;
  std::string state_path;
};

// Profiles, pretrains, searches, then writes history.jsonl, state.json and
// the report files into output_dir.
RunOutcome execute_search(const RunConfig& config);

}  // namespace macprune

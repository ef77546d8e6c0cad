// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "macprune/run_config.hpp"

namespace macprune {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json mlp_config(const fs::path& out) {
  auto doc = nlohmann::json::parse(R"({
    "model": "fixture:mini-mlp",
    "dataset": {"samples": 240, "seed": 5},
    "target_macs": 200,
    "band": "+5/-15",
    "r_max": 12,
    "extended_budget": 2,
    "round_to": 1,
    "pretrain": {"epochs": 8},
    "finetune": {"epochs": 2}
  })");
  doc["output_dir"] = out.string();
  return doc;
}

TEST(RunConfig, ParsesAndResolvesRelativePaths) {
  const auto doc = nlohmann::json::parse(R"({"model": "nets/a.txt", "target_macs": 1e6, "oracle": "llm",
      "canned_dir": "canned", "band": "+3/-10", "criterion": "l2", "safety": {"max_qkv_factor": 0.2}})");
  const RunConfig c = run_config_from_json(doc, "/base");
  EXPECT_EQ(c.model, "/base/nets/a.txt");
  EXPECT_EQ(c.canned_dir, "/base/canned");
  EXPECT_EQ(c.oracle, OracleKind::kLlm);
  EXPECT_DOUBLE_EQ(c.band.overshoot_pct, 3.0);
  EXPECT_EQ(c.criterion, Criterion::kL2Norm);
  EXPECT_EQ(run_config_from_json(nlohmann::json::parse(R"({"target_macs": 5})"), "/base").model,
            "fixture:mini-resnet");
}

TEST(RunConfig, RejectsBadInput) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse("{}")), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"target_macs": -1})")), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"target_macs": 1, "oracle": "oracle"})")),
               std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"target_macs": 1, "oracle": "replay"})")),
               std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"target_macs": 1, "round_to": 3})")),
               std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"target_macs": "big"})")), std::invalid_argument);
}

TEST(RunConfig, JsonRoundTrip) {
  const RunConfig c = run_config_from_json(mlp_config("/tmp/x"), "/");
  const RunConfig back = run_config_from_json(nlohmann::json::parse(to_json(c).dump()), "/");
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(ExecuteSearch, SmallMlpRunWritesArtifactsDeterministically) {
  const fs::path root = fs::temp_directory_path() / "macprune_exec_test";
  fs::remove_all(root);
  const RunOutcome a = execute_search(run_config_from_json(mlp_config(root / "a"), "/"));
  const RunOutcome b = execute_search(run_config_from_json(mlp_config(root / "b"), "/"));
  EXPECT_TRUE(a.result.found_valid());
  for (const char* f : {"history.jsonl", "state.json", "report.txt", "report.json", "trajectory.csv", "timing.csv",
                        "outcomes.csv", "usage.csv"}) {
    ASSERT_TRUE(fs::exists(root / "a" / f)) << f;
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  const auto state = nlohmann::json::parse(slurp(root / "a" / "state.json"));
  EXPECT_EQ(state["target_macs"].get<double>(), 200.0);
  fs::remove_all(root);
}

TEST(LoadModel, FixturesAndFiles) {
  EXPECT_EQ(load_model("fixture:mini-mlp").size(), 4u);
  EXPECT_EQ(load_model(std::string(MACPRUNE_TEST_DATA_DIR) + "/fixtures/models/tiny_cnn.txt").dataset_profile(),
            DatasetProfile::kCifarLike);
  EXPECT_ANY_THROW(load_model("fixture:nope"));
  EXPECT_ANY_THROW(load_model("/no/such/file.txt"));
}

}  // namespace
}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "macprune/fixtures.hpp"
#include "macprune/net_backend.hpp"
#include "macprune/reports.hpp"

namespace macprune {

std::string_view to_string(OracleKind k) {
  switch (k) {
    case OracleKind::kHeuristic:
      return "heuristic";
    case OracleKind::kLlm:
      return "llm";
    case OracleKind::kReplay:
      return "replay";
  }
  return "heuristic";
}

namespace {

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || path.rfind("fixture:", 0) == 0) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw std::invalid_argument("run config must be a JSON object");
  RunConfig c;
  try {
    c.model = resolve(doc.value("model", c.model), base_dir);
    c.model_arch = doc.value("model_arch", c.model);
    if (doc.contains("dataset")) c.dataset = dataset_params_from_json(doc["dataset"], c.dataset);
    if (!doc.contains("target_macs")) throw std::invalid_argument("run config needs target_macs");
    c.target_macs = doc["target_macs"].get<double>();
    if (doc.contains("band")) c.band = parse_band(doc["band"].get<std::string>());
    c.r_max = doc.value("r_max", c.r_max);
    c.extended_budget = doc.value("extended_budget", c.extended_budget);
    const std::string oracle = doc.value("oracle", "heuristic");
    if (oracle == "heuristic") {
      c.oracle = OracleKind::kHeuristic;
    } else if (oracle == "llm") {
      c.oracle = OracleKind::kLlm;
    } else if (oracle == "replay") {
      c.oracle = OracleKind::kReplay;
    } else {
      throw std::invalid_argument("unknown oracle '" + oracle + "'");
    }
    if (doc.contains("endpoint")) c.endpoint = endpoint_from_json(doc["endpoint"], c.endpoint);
    c.canned_dir = resolve(doc.value("canned_dir", ""), base_dir);
    c.replay_history = resolve(doc.value("replay_history", ""), base_dir);
    if (doc.contains("criterion")) {
      const auto cr = parse_criterion(doc["criterion"].get<std::string>());
      if (!cr) throw std::invalid_argument("unknown criterion");
      c.criterion = *cr;
    }
    c.round_to = doc.value("round_to", c.round_to);
    if (!is_valid_round_to(c.round_to)) throw std::invalid_argument("round_to must be one of 1, 2, 4, 8, 16");
    c.global_pruning = doc.value("global_pruning", c.global_pruning);
    if (doc.contains("pretrain")) c.pretrain = train_config_from_json(doc["pretrain"], c.pretrain);
    if (doc.contains("finetune")) c.finetune = train_config_from_json(doc["finetune"], TrainConfig::cnn_inline());
    c.init_seed = doc.value("init_seed", c.init_seed);
    c.score_seed = doc.value("score_seed", c.score_seed);
    c.calibration_samples = doc.value("calibration_samples", c.calibration_samples);
    const std::string timing = doc.value("timing", "virtual");
    if (timing == "virtual") {
      c.timing = TimingMode::kVirtual;
    } else if (timing == "wall") {
      c.timing = TimingMode::kWall;
    } else {
      throw std::invalid_argument("timing must be virtual or wall");
    }
    if (doc.contains("safety")) c.safety_overrides = doc["safety"];
    c.output_dir = resolve(doc.value("output_dir", c.output_dir), base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  if (!(c.target_macs > 0.0)) throw std::invalid_argument("target_macs must be positive");
  if (c.oracle == OracleKind::kReplay && c.replay_history.empty()) {
    throw std::invalid_argument("replay oracle needs replay_history");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run config " + path);
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::invalid_argument("run config " + path + " is not valid JSON");
  return run_config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = c.model;
  j["model_arch"] = c.model_arch;
  j["dataset"] = to_json(c.dataset);
  j["target_macs"] = c.target_macs;
  j["band"] = format_band(c.band);
  j["r_max"] = c.r_max;
  j["extended_budget"] = c.extended_budget;
  j["oracle"] = to_string(c.oracle);
  j["endpoint"] = to_json(c.endpoint);
  j["canned_dir"] = c.canned_dir;
  j["replay_history"] = c.replay_history;
  j["criterion"] = to_string(c.criterion);
  j["round_to"] = c.round_to;
  j["global_pruning"] = c.global_pruning;
  j["pretrain"] = to_json(c.pretrain);
  if (c.finetune) j["finetune"] = to_json(*c.finetune);
  j["init_seed"] = c.init_seed;
  j["score_seed"] = c.score_seed;
  j["calibration_samples"] = c.calibration_samples;
  j["timing"] = c.timing == TimingMode::kVirtual ? "virtual" : "wall";
  j["safety"] = c.safety_overrides;
  j["output_dir"] = c.output_dir;
  return j;
}

ModelGraph load_model(const std::string& model) {
  if (model.rfind("fixture:", 0) == 0) return fixture_graph(model.substr(8));
  return load_graph_file(model);
}

RunOutcome execute_search(const RunConfig& c) {
  const ModelGraph graph = load_model(c.model);
  DatasetParams dp = c.dataset;
  const LayerNode& in = graph.node(graph.input_index());
  dp.channels = in.out_channels;
  dp.height = in.out_h;
  dp.width = in.out_w;
  dp.classes = num_classes(graph);
  const SyntheticDataset data = generate_dataset(dp);
  const TrainResult base = pretrain_baseline(graph, data, c.pretrain, c.init_seed);
  if (base.diverged) throw std::runtime_error("baseline training diverged");

  NetBackendOptions bo;
  bo.model_arch = c.model_arch.empty() ? c.model : c.model_arch;
  bo.calibration_samples = c.calibration_samples;
  bo.seed = c.score_seed;
  bo.finetune = c.finetune.value_or(graph.has_attention() ? TrainConfig::vit_inline() : TrainConfig::cnn_inline());
  NetBackend backend(base.net, data, bo);

  std::unique_ptr<StrategyOracle> oracle;
  switch (c.oracle) {
    case OracleKind::kHeuristic:
      oracle = std::make_unique<HeuristicOracle>();
      break;
    case OracleKind::kLlm: {
      std::shared_ptr<ChatClient> client;
      if (!c.canned_dir.empty()) {
        client = std::make_shared<CannedChatClient>(c.canned_dir);
      } else {
        client = std::make_shared<HttpChatClient>(c.endpoint);
      }
      oracle = std::make_unique<LlmOracle>(client, c.endpoint);
      break;
    }
    case OracleKind::kReplay: {
      std::vector<Strategy> seq;
      for (const auto& r : read_history(c.replay_history)) seq.push_back(r.strategy);
      oracle = std::make_unique<ReplayOracle>(std::move(seq));
      break;
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + c.output_dir + ": " + ec.message());

  RunOutcome out;
  out.baseline_accuracy = backend.baseline_accuracy();
  out.history_path = (std::filesystem::path(c.output_dir) / "history.jsonl").string();
  out.state_path = (std::filesystem::path(c.output_dir) / "state.json").string();

  SearchOptions so;
  so.target_macs = c.target_macs;
  so.band = c.band;
  so.r_max = c.r_max;
  so.extended_budget = c.extended_budget;
  so.limits = limits_from_json(c.safety_overrides, SafetyLimits::for_profile(graph.dataset_profile()));
  so.criterion = c.criterion;
  so.round_to = c.round_to;
  so.global_pruning = c.global_pruning;
  so.model_arch = bo.model_arch;
  so.timing = c.timing;
  so.history_path = out.history_path;
  const std::string state_path = out.state_path;
  so.on_revision = [&state_path](const RevisionRecord&, const SearchState& st) {
    std::ofstream f(state_path, std::ios::trunc);
    f << to_json(st).dump(2) << "\n";
  };

  out.result = run_search(backend, *oracle, so);

  nlohmann::ordered_json state = to_json(out.result.state);
  state["target_macs"] = c.target_macs;
  state["band"] = format_band(c.band);
  state["oracle"] = to_string(c.oracle);
  state["usage"] = to_json(out.result.usage);
  state["baseline_macs"] = out.result.profile.baseline_macs;
  state["baseline_accuracy"] = out.baseline_accuracy;
  {
    std::ofstream f(out.state_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out.state_path);
    f << state.dump(2) << "\n";
  }
  ReportInputs ri{out.result.state, out.result.usage, c.target_macs, c.band, std::string(to_string(c.oracle))};
  write_reports(build_reports(ri), c.output_dir);
  return out;
}

}  // namespace macprune

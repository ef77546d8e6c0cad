// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exit codes: 0 success; 1 search ended without a valid candidate;
// 2 bad input or configuration; 3 oracle unavailable (state saved); 4 I/O failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "macprune/dependency.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/importance.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "macprune/pruner.hpp"
#include "macprune/reports.hpp"
#include "macprune/run_config.hpp"
#include "macprune/safety.hpp"

using namespace macprune;

namespace {

constexpr int kExitNoCandidate = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitOracle = 3;
constexpr int kExitIo = 4;

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot read " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::invalid_argument(path + " is not valid JSON");
  return doc;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path);
  out << text;
}

int cmd_profile(const std::string& spec, bool json) {
  const ModelGraph g = load_model(spec);
  const auto groups = group_isomorphic(g);
  const MacReport rep = count_model_macs(g, groups);
  if (json) {
    std::cout << to_json(rep).dump(2) << "\n";
  } else {
    std::cout << to_table(rep, g);
  }
  return 0;
}

int cmd_prune(const std::string& spec, const std::string& strategy_path, const std::string& scores_path,
              std::optional<double> target_macs, const std::string& out_spec, const std::string& report_path) {
  const ModelGraph g = load_model(spec);
  const DependencyGraph deps = derive_dependencies(g);
  const auto groups = group_isomorphic(g);
  Strategy s = strategy_from_json(read_json_file(strategy_path));
  const ImportanceTable scores = importance_from_json(read_json_file(scores_path));
  if (!scores.covers(g)) throw std::invalid_argument("scores file does not cover every prunable channel of " + spec);
  if (target_macs) {
    const double base = static_cast<double>(count_total_macs(g));
    SafetyContext ctx;
    ctx.target_ratio = 1.0 - *target_macs / base;
    const SafetyResult r = validate_and_correct(s, ctx, SafetyLimits::for_profile(g.dataset_profile()));
    for (const auto& line : r.log) std::cerr << "safety: " << line << "\n";
    s = r.strategy;
  }
  const WeightedNet shell = init_weights(g, 0);
  const PruneOutcome out = apply_pruning(shell, deps, groups, scores, s);
  StructureLimits lim;
  lim.vit_mode = g.has_attention() && g.dataset_profile() == DatasetProfile::kImagenetLike;
  for (const auto& p : validate_structure(out, lim)) std::cerr << "structure: " << p << "\n";
  write_text(out_spec, to_text(out.pruned_graph));
  auto rep = kept_report(out);
  rep["strategy"] = to_json(s);
  rep["baseline_macs"] = count_total_macs(g);
  rep["achieved_macs"] = out.achieved_macs;
  if (!report_path.empty()) write_text(report_path, rep.dump(2) + "\n");
  std::cerr << "achieved MACs " << out.achieved_macs << " (" << format_giga(static_cast<double>(out.achieved_macs))
            << "G)\n";
  return 0;
}

int cmd_scores(const std::string& spec, const std::string& criterion, std::uint64_t seed, int samples,
               const std::string& out) {
  const ModelGraph g = load_model(spec);
  const auto c = parse_criterion(criterion);
  if (!c) throw std::invalid_argument("unknown criterion '" + criterion + "'");
  const WeightedNet net = init_weights(g, seed);
  std::vector<Batch> calib;
  if (*c == Criterion::kTaylor) {
    DatasetParams dp;
    const LayerNode& in = g.node(g.input_index());
    dp.channels = in.out_channels;
    dp.height = in.out_h;
    dp.width = in.out_w;
    dp.classes = num_classes(g);
    dp.samples = std::max(samples * 2, dp.classes * 2);
    dp.seed = seed;
    const SyntheticDataset ds = generate_dataset(dp);
    std::vector<int> rows;
    for (int i = 0; i < std::min(samples, ds.train.n); ++i) rows.push_back(i);
    calib = split_batches(gather(ds.train, ds.sample_size(), rows), ds.sample_size(), 32);
  }
  write_text(out, to_json(compute_scores(net, *c, calib, seed)).dump() + "\n");
  return 0;
}

int cmd_search(const std::string& config_path, const std::string& outdir_override) {
  RunConfig cfg = load_run_config(config_path);
  if (!outdir_override.empty()) cfg.output_dir = outdir_override;
  const RunOutcome out = execute_search(cfg);
  std::ifstream rep(cfg.output_dir + "/report.txt");
  std::cout << rep.rdbuf();
  if (out.result.state.aborted) {
    std::cerr << "search aborted: " << out.result.state.abort_message << " (state saved to " << out.state_path
              << ")\n";
    return kExitOracle;
  }
  return out.result.found_valid() ? 0 : kExitNoCandidate;
}

int cmd_replay(const std::string& history_path, const std::string& band_text, double target,
               const std::string& profile_name, const std::string& outdir) {
  const auto profile = parse_dataset_profile(profile_name);
  if (!profile) throw std::invalid_argument("unknown dataset profile '" + profile_name + "'");
  const ToleranceBand band = parse_band(band_text);
  const auto history = read_history(history_path);
  const SearchState st = replay_state(history, target, band, SafetyLimits::for_profile(*profile));
  ReportInputs in{st, OracleUsage{}, target, band, "replay"};
  const auto files = build_reports(in);
  std::cout << "Statuses:";
  for (const auto& r : st.history) std::cout << " " << r.index << ":" << to_string(r.status);
  std::cout << "\n" << files.at("report.txt");
  if (!outdir.empty()) write_reports(files, outdir);
  return 0;
}

int cmd_report(const std::string& state_path, const std::string& outdir) {
  const auto doc = read_json_file(state_path);
  ReportInputs in;
  in.state = state_from_json(doc);
  in.target_macs = doc.value("target_macs", 0.0);
  in.band = parse_band(doc.value("band", std::string("+5/-15")));
  in.oracle_name = doc.value("oracle", "");
  if (doc.contains("usage")) {
    const auto& u = doc["usage"];
    in.usage.calls = u.value("calls", std::int64_t{0});
    in.usage.input_tokens = u.value("input_tokens", std::int64_t{0});
    in.usage.output_tokens = u.value("output_tokens", std::int64_t{0});
    in.usage.rate_in_per_million = u.value("rate_in_per_million", 3.0);
    in.usage.rate_out_per_million = u.value("rate_out_per_million", 15.0);
  }
  const auto files = build_reports(in);
  std::cout << files.at("report.txt");
  if (!outdir.empty()) write_reports(files, outdir);
  return 0;
}

int cmd_export_fixture(const std::string& name, const std::string& format, const std::string& out) {
  const ModelGraph g = fixture_graph(name);
  if (format == "json") {
    write_text(out, to_json_text(g));
  } else if (format == "text") {
    write_text(out, to_text(g));
  } else {
    throw std::invalid_argument("format must be text or json");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAC-budget structured pruning search"};
  app.require_subcommand(1);

  std::string spec;
  bool json = false;
  auto* profile = app.add_subcommand("profile", "Per-layer and per-group MAC report");
  profile->add_option("spec", spec, "Model spec file or fixture:<name>")->required();
  profile->add_flag("--json", json, "Emit JSON");

  std::string strategy_path, scores_path, out_spec = "-", report_path;
  std::optional<double> target_opt;
  auto* prune = app.add_subcommand("prune", "Prune a model spec with a strategy and importance scores");
  prune->add_option("spec", spec, "Model spec file or fixture:<name>")->required();
  prune->add_option("--strategy", strategy_path, "Strategy JSON")->required();
  prune->add_option("--scores", scores_path, "Importance table JSON")->required();
  prune->add_option("--target", target_opt, "Target MACs; enables safety correction");
  prune->add_option("-o,--out", out_spec, "Pruned spec output (- for stdout)");
  prune->add_option("--report", report_path, "Kept-index report JSON");

  std::string criterion = "l1";
  std::uint64_t seed = 0;
  int samples = 64;
  std::string scores_out = "-";
  auto* scores = app.add_subcommand("scores", "Importance table for a freshly initialised net");
  scores->add_option("spec", spec, "Model spec file or fixture:<name>")->required();
  scores->add_option("--criterion", criterion, "taylor, l1, l2 or random");
  scores->add_option("--seed", seed, "Weight and data seed");
  scores->add_option("--samples", samples, "Calibration samples (taylor)");
  scores->add_option("-o,--out", scores_out, "Output path (- for stdout)");

  std::string config_path, outdir;
  auto* search = app.add_subcommand("search", "Run the full revision loop from a run config");
  search->add_option("config", config_path, "Run config JSON")->required();
  search->add_option("--out", outdir, "Override output_dir");

  std::string history_path, band_text = "+5/-15", profile_name = "imagenet-like";
  double target = 0.0;
  auto* replay = app.add_subcommand("replay", "Re-derive statuses and reports from a recorded history");
  replay->add_option("history", history_path, "History JSONL")->required();
  replay->add_option("--band", band_text, "Tolerance band, e.g. +5/-15");
  replay->add_option("--target", target, "Target MACs")->required();
  replay->add_option("--profile", profile_name, "Dataset profile for collapse detection");
  replay->add_option("--out", outdir, "Write report files here");

  std::string state_path;
  auto* report = app.add_subcommand("report", "Re-emit reports from a saved search state");
  report->add_option("state", state_path, "state.json from a search")->required();
  report->add_option("--out", outdir, "Write report files here");

  std::string fixture_name, format = "text", fixture_out = "-";
  auto* exp = app.add_subcommand("export-fixture", "Write a built-in model graph");
  exp->add_option("name", fixture_name, "mini-resnet, mini-deit, mini-mlp, resnet50, deit-tiny, conv-chain")
      ->required();
  exp->add_option("--format", format, "text or json");
  exp->add_option("-o,--out", fixture_out, "Output path (- for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  try {
    if (profile->parsed()) return cmd_profile(spec, json);
    if (prune->parsed()) return cmd_prune(spec, strategy_path, scores_path, target_opt, out_spec, report_path);
    if (scores->parsed()) return cmd_scores(spec, criterion, seed, samples, scores_out);
    if (search->parsed()) return cmd_search(config_path, outdir);
    if (replay->parsed()) return cmd_replay(history_path, band_text, target, profile_name, outdir);
    if (report->parsed()) return cmd_report(state_path, outdir);
    if (exp->parsed()) return cmd_export_fixture(fixture_name, format, fixture_out);
  } catch (const OracleUnavailable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "generators.hpp"
#include "macprune/dependency.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/importance.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "macprune/net_backend.hpp"
#include "macprune/prompts.hpp"
#include "macprune/pruner.hpp"
#include "macprune/reports.hpp"
#include "macprune/run_config.hpp"
#include "macprune/trainer.hpp"
#include "oracles.hpp"

using namespace macprune;
namespace fs = std::filesystem;

namespace {

// Pinned limits.
constexpr int kMacShapes = 50;
constexpr double kMacSeconds = 10.0;
constexpr int kPruneePairs = 200;
constexpr double kPruneSeconds = 60.0;
constexpr double kQuadraticRelTol = 0.10;
constexpr int kGradProbes = 100;
constexpr double kGradRelTol = 1e-4;
constexpr double kSpearmanMin = 0.8;
constexpr int kSurfaceRuns = 100;
constexpr int kSurfaceRevisions = 10;
constexpr double kSurfaceSuccess = 0.95;
constexpr double kSurfaceSeconds = 120.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string data_path(const std::string& rel) { return std::string(MACPRUNE_TEST_DATA_DIR) + "/" + rel; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict mac_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::Rng rng(101);
  int exact = 0;
  for (int i = 0; i < kMacShapes; ++i) {
    const LayerNode c = testing::random_conv_layer(rng);
    exact += count_layer_macs(c) == testing::enumerate_macs(c);
    const LayerNode d = testing::random_linear_layer(rng);
    exact += count_layer_macs(d) == testing::enumerate_macs(d);
  }
  const double s = seconds_since(t0);
  return {exact == 2 * kMacShapes && s < kMacSeconds,
          std::to_string(exact) + "/" + std::to_string(2 * kMacShapes) + " shapes exact in " + fmt("%.2f", s) + " s"};
}

Verdict prediction_agreement() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::Rng rng(202);
  int agree = 0, pruned = 0, infeasible = 0;
  std::string first_problem;
  for (int i = 0; i < kPruneePairs; ++i) {
    const bool vit = i % 2 == 1;
    const ModelGraph g = vit ? testing::random_vit_graph(rng) : testing::random_cnn_graph(rng);
    const Strategy s = testing::random_strategy(rng, vit ? PruneMode::kVit : PruneMode::kCnn);
    const auto deps = derive_dependencies(g);
    const auto groups = group_isomorphic(g);
    const WeightedNet net = init_weights(g, static_cast<std::uint64_t>(i));
    const Criterion c = s.criterion == Criterion::kTaylor ? Criterion::kL1Norm : s.criterion;
    const ImportanceTable scores = compute_scores(net, c, {}, static_cast<std::uint64_t>(i));
    std::optional<MacCount> predicted;
    bool predict_infeasible = false;
    try {
      predicted = predict_pruned_macs(g, deps, groups, s, &scores);
    } catch (const InfeasibleStrategy&) {
      predict_infeasible = true;
    }
    try {
      const PruneOutcome out = apply_pruning(net, deps, groups, scores, s);
      ++pruned;
      const MacCount recount = count_total_macs(load_graph(to_text(out.pruned_graph)));
      StructureLimits lim;
      lim.min_head_dim = 1;
      lim.max_unit_ratio = 1.0;
      const bool ok = predicted && *predicted == recount && recount == out.achieved_macs &&
                      validate_structure(out, lim).empty();
      if (ok) {
        ++agree;
      } else if (first_problem.empty()) {
        first_problem = "; first mismatch at pair " + std::to_string(i) + " " + summarize(s);
      }
    } catch (const InfeasibleStrategy&) {
      ++infeasible;
      if (predict_infeasible) {
        ++agree;
      } else if (first_problem.empty()) {
        first_problem = "; pair " + std::to_string(i) + " predicted but not executable";
      }
    } catch (const std::exception& e) {
      if (first_problem.empty()) first_problem = std::string("; pair ") + std::to_string(i) + ": " + e.what();
    }
  }
  const double s = seconds_since(t0);
  return {agree == kPruneePairs && s < kPruneSeconds,
          std::to_string(agree) + "/" + std::to_string(kPruneePairs) + " agree (" + std::to_string(pruned) +
              " pruned, " + std::to_string(infeasible) + " rejected as infeasible by both) in " + fmt("%.1f", s) +
              " s" + first_problem};
}

Verdict quadratic_regime() {
  const ModelGraph g = uniform_conv_chain_graph(8, 32, 8);
  const auto deps = derive_dependencies(g);
  const auto groups = group_isomorphic(g);
  const WeightedNet net = init_weights(g, 1);
  const ImportanceTable scores = magnitude_scores(net, NormKind::kL1);
  const double base = static_cast<double>(count_total_macs(g));
  bool all = true;
  std::string detail;
  for (double r : {0.2, 0.3, 0.5}) {
    Strategy s;
    s.criterion = Criterion::kL1Norm;
    s.channel_pruning_ratio = r;
    s.round_to = 1;
    const double ratio = static_cast<double>(apply_pruning(net, deps, groups, scores, s).achieved_macs) / base;
    const double model = (1.0 - r) * (1.0 - r);
    const double rel = std::abs(ratio - model) / model;
    all = all && rel <= kQuadraticRelTol;
    detail += "r=" + fmt("%.1f", r) + ": " + fmt("%.4f", ratio) + " vs " + fmt("%.4f", model) + " (" +
              fmt("%.1f", rel * 100.0) + "%) ";
  }
  return {all, detail};
}

Verdict gradient_correctness() {
  bool all = true;
  std::string detail;
  std::uint64_t seed = 300;
  for (const std::string name : {"mini-mlp", "mini-resnet", "mini-deit"}) {
    const ModelGraph g = fixture_graph(name);
    const WeightedNet net = init_weights(g, ++seed);
    const Batch b = testing::sample_batch(g, 4, ++seed);
    double worst = 0.0;
    for (const auto& p : testing::check_gradients(net, b, kGradProbes, ++seed)) worst = std::max(worst, p.relative_error);
    all = all && worst < kGradRelTol;
    detail += name + " worst " + fmt("%.2e", worst) + "; ";
  }
  return {all, detail};
}

Verdict taylor_fidelity() {
  const ModelGraph g = mini_mlp_graph();
  const SyntheticDataset data = generate_dataset(testing::dataset_for(g, 400, 21));
  TrainConfig cfg = TrainConfig::pretrain();
  cfg.epochs = 10;
  const TrainResult trained = pretrain_baseline(g, data, cfg, 5);
  std::vector<int> rows(64);
  for (int i = 0; i < 64; ++i) rows[static_cast<std::size_t>(i)] = i;
  const Batch calib = gather(data.train, data.sample_size(), rows);
  const auto loo = testing::leave_one_out_loss_change(trained.net, calib);
  const ImportanceTable taylor = taylor_scores(trained.net, {calib});
  std::vector<double> a, b;
  for (const auto& [id, v] : loo) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      a.push_back(taylor.score(id, static_cast<int>(c)));
      b.push_back(v[c]);
    }
  }
  const double rho = spearman(a, b);
  return {rho >= kSpearmanMin, "Spearman " + fmt("%.3f", rho) + " over " + std::to_string(a.size()) +
                                   " units (baseline acc " + fmt("%.1f", trained.accuracy) + "%)"};
}

Verdict trajectory_replay() {
  const auto history = read_history(data_path("fixtures/replay/resnet50_history.jsonl"));
  const ToleranceBand band = parse_band("+5/-15");
  const SearchState st =
      replay_state(history, 2.06e9, band, SafetyLimits::for_profile(DatasetProfile::kImagenetLike));
  bool statuses = st.history.size() >= 10;
  for (std::size_t i = 0; statuses && i < 10; ++i) {
    statuses = st.history[i].mac_status == (i < 8 ? MacStatus::kUndershoot : MacStatus::kValid);
  }
  const auto files = build_reports({st, OracleUsage{}, 2.06e9, band, "replay"});
  const std::string& text = files.at("report.txt");
  const bool valid_row = text.find("Within Tolerance        22 (71%)") != std::string::npos;
  const bool over_row = text.find("0 (0%)") != std::string::npos &&
                        count_with_pct(count_outcomes(st.history).overshoot, 31) == "0 (0%)";
  return {statuses && valid_row && over_row, std::string("revisions 1-8 undershoot, 9-10 valid: ") +
                                                 (statuses ? "yes" : "no") + "; outcome row 22 (71%): " +
                                                 (valid_row ? "yes" : "no") + "; overshoot 0 (0%): " +
                                                 (over_row ? "yes" : "no")};
}

Verdict heuristic_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  int reached = 0, overshoots = 0;
  for (int i = 0; i < kSurfaceRuns; ++i) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(i);
    const SurfaceParams p = random_surface(seed, i % 2 ? PruneMode::kVit : PruneMode::kCnn);
    testing::Rng rng(seed);
    const double frac = std::uniform_real_distribution<double>(0.25, 0.8)(rng);
    SurfaceBackend backend(p);
    HeuristicOracle oracle;
    SearchOptions o;
    o.target_macs = std::round(p.baseline_macs * frac);
    o.band = parse_band("+5/-15");
    o.r_max = kSurfaceRevisions;
    o.extended_budget = 0;
    const SearchResult r = run_search(backend, oracle, o);
    for (const auto& rec : r.state.history) {
      if (rec.index <= kSurfaceRevisions && rec.mac_status == MacStatus::kValid && rec.inline_ft_acc) {
        ++reached;
        break;
      }
    }
    for (const auto& c : r.state.candidates) overshoots += c.achieved_macs > o.target_macs * 1.05 * (1 + 1e-12);
  }
  const double s = seconds_since(t0);
  const double rate = static_cast<double>(reached) / kSurfaceRuns;
  return {rate >= kSurfaceSuccess && overshoots == 0 && s < kSurfaceSeconds,
          std::to_string(reached) + "/" + std::to_string(kSurfaceRuns) + " valid within " +
              std::to_string(kSurfaceRevisions) + " revisions, " + std::to_string(overshoots) +
              " accepted overshoots, " + fmt("%.1f", s) + " s"};
}

Verdict safety_suite() {
  int preset_ok = 0, preset_total = 0;
  for (auto profile : {DatasetProfile::kImagenetLike, DatasetProfile::kCifarLike, DatasetProfile::kSynthetic}) {
    for (auto mode : {PruneMode::kVit, PruneMode::kCnn}) {
      for (int i = 1; i <= 99; ++i) {
        SafetyContext ctx;
        ctx.target_ratio = i / 100.0;
        ++preset_total;
        preset_ok += passes_validation(fallback_preset(profile, ctx.target_ratio, mode), ctx,
                                       SafetyLimits::for_profile(profile));
      }
    }
  }
  Strategy failed;
  failed.channel_pruning_ratio = 0.653;
  failed.round_to = 2;
  SafetyContext ctx;
  ctx.target_ratio = 0.5;
  ctx.zones = {zone_around(failed)};
  const auto limits = SafetyLimits::for_profile(DatasetProfile::kImagenetLike);
  Strategy near = failed, far = failed;
  near.channel_pruning_ratio = 0.65;
  far.channel_pruning_ratio = 0.71;
  const bool zone_ok = !passes_validation(near, ctx, limits) && passes_validation(far, ctx, limits);
  const bool collapse_ok = detect_collapse(0.11, DatasetProfile::kImagenetLike) &&
                           !detect_collapse(2.61, DatasetProfile::kImagenetLike);
  return {preset_ok == preset_total && zone_ok && collapse_ok,
          "presets " + std::to_string(preset_ok) + "/" + std::to_string(preset_total) + " unchanged; danger zone " +
              (zone_ok ? "flags 0.65, passes 0.71" : "WRONG") + "; collapse " + (collapse_ok ? "0.11 yes, 2.61 no" : "WRONG")};
}

Verdict prompt_fidelity() {
  const std::pair<PromptTemplate, const char*> all[] = {{PromptTemplate::kProfiling, "profiling"},
                                                        {PromptTemplate::kMaster, "master"},
                                                        {PromptTemplate::kAnalysisCnn, "analysis_cnn"},
                                                        {PromptTemplate::kAnalysisVit, "analysis_vit"}};
  int ok = 0;
  for (const auto& [t, name] : all) {
    const std::string golden = slurp(data_path(std::string("golden/prompts/") + name + ".txt"));
    PromptContext ctx;
    for (const auto& p : placeholders_in(golden)) ctx[p] = "\x01" + p + "\x02";
    ok += !golden.empty() && render_prompt(t, ctx) == render_text(golden, ctx) &&
          std::string(template_text(t)) == golden;
  }
  return {ok == 4, std::to_string(ok) + "/4 templates byte-identical outside placeholders"};
}

Verdict llm_offline() {
  const ModelGraph g = deit_tiny_graph();
  SurfaceParams sp;
  sp.baseline_macs = static_cast<double>(count_total_macs(g));
  sp.mode = PruneMode::kVit;
  sp.dataset_profile = DatasetProfile::kImagenetLike;
  std::string detail;
  const double target = std::round(sp.baseline_macs * 0.5);
  auto run = [&](const std::string& dir) {
    SurfaceBackend backend(sp);
    LlmOracle oracle(std::make_shared<CannedChatClient>(data_path("fixtures/llm/" + dir)), EndpointConfig{});
    SearchOptions o;
    o.target_macs = target;
    o.r_max = 1;
    return run_search(backend, oracle, o);
  };
  const SearchResult valid = run("valid_vit");
  const SearchResult bad = run("malformed");
  const SearchResult unsafe = run("unsafe_vit");
  auto first = [](const SearchResult& r) -> const RevisionRecord* {
    return r.state.history.empty() ? nullptr : &r.state.history.front();
  };
  const double t = 1.0 - target / sp.baseline_macs;
  const auto limits = SafetyLimits::for_profile(DatasetProfile::kImagenetLike);
  const bool valid_ok = first(valid) && first(valid)->oracle_event.empty() &&
                        first(valid)->strategy.multipliers.mlp == 0.75 && valid.usage.calls == 1 &&
                        valid.usage.input_tokens > 0;
  const bool bad_ok = first(bad) && first(bad)->oracle_event.find("fallback") != std::string::npos &&
                      first(bad)->strategy.same_configuration(fallback_preset(limits, t, PruneMode::kVit)) &&
                      bad.usage.calls == 1;
  const RevisionRecord* u = first(unsafe);
  const bool unsafe_ok = u && u->oracle_event.empty() && !u->corrections.empty() &&
                         u->strategy.base_ratio * u->strategy.multipliers.qkv <= limits.qkv_effective_cap(t) + 1e-6 &&
                         u->strategy.multipliers.proj == 0.0 && unsafe.usage.calls == 1 && u->input_tokens > 0;
  detail = std::string("valid->parsed ") + (valid_ok ? "yes" : "no") + "; malformed->fallback " +
           (bad_ok ? "yes" : "no") + "; unsafe->corrected " + (unsafe_ok ? "yes" : "no") + " (" +
           (u ? std::to_string(u->corrections.size()) : "0") + " corrections logged)";
  return {valid_ok && bad_ok && unsafe_ok, detail};
}

Verdict end_to_end_determinism(const fs::path& workdir, const std::string& cli) {
  const std::string config = data_path("fixtures/configs/determinism.json");
  const fs::path a = workdir / "determinism-a";
  const fs::path b = workdir / "determinism-b";
  fs::remove_all(a);
  fs::remove_all(b);
  if (!cli.empty()) {
    for (const auto& out : {a, b}) {
      const std::string cmd = "\"" + cli + "\" search \"" + config + "\" --out \"" + out.string() + "\" > /dev/null";
      const int rc = std::system(cmd.c_str());
      if (rc != 0 && rc != 256) return {false, "search exited with status " + std::to_string(rc)};
    }
  } else {
    for (const auto& out : {a, b}) {
      RunConfig c = load_run_config(config);
      c.output_dir = out.string();
      execute_search(c);
    }
  }
  int same = 0, total = 0;
  std::string diff;
  for (const char* f :
       {"history.jsonl", "state.json", "report.txt", "report.json", "trajectory.csv", "timing.csv", "outcomes.csv", "usage.csv"}) {
    ++total;
    const std::string x = slurp(a / f);
    if (!x.empty() && x == slurp(b / f)) {
      ++same;
    } else if (diff.empty()) {
      diff = std::string("; differs: ") + f;
    }
  }
  const auto hist = read_history((a / "history.jsonl").string());
  return {same == total, std::to_string(same) + "/" + std::to_string(total) + " artifacts byte-identical over " +
                             std::to_string(hist.size()) + " revisions" + (cli.empty() ? "" : " (via CLI)") + diff};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "macprune-acceptance";
  std::string cli;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--workdir") workdir = argv[i + 1];
    if (flag == "--cli") cli = argv[i + 1];
  }
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"mac-formula-exactness", mac_exactness},
      {"prediction-execution-agreement", prediction_agreement},
      {"quadratic-regime", quadratic_regime},
      {"gradient-correctness", gradient_correctness},
      {"taylor-fidelity", taylor_fidelity},
      {"trajectory-replay", trajectory_replay},
      {"heuristic-convergence", heuristic_convergence},
      {"safety-suite", safety_suite},
      {"prompt-fidelity", prompt_fidelity},
      {"offline-llm-coverage", llm_offline},
      {"end-to-end-determinism", [&] { return end_to_end_determinism(workdir, cli); }},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << n << ". " << name << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures;
}

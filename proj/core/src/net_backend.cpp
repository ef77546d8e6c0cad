// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/net_backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "macprune/macprof.hpp"

namespace macprune {

TrainResult pretrain_baseline(const ModelGraph& graph, const SyntheticDataset& data, const TrainConfig& config,
                              std::uint64_t init_seed) {
  const WeightedNet init = init_weights(graph, init_seed);
  if (input_size(graph) != data.sample_size()) throw ShapeError("graph input does not match dataset samples");
  const Batch subset = config.subset_fraction >= 1.0
                           ? data.train
                           : stratified_subset(data.train, data.sample_size(), config.subset_fraction, config.seed);
  return train(init, subset, data.val, config, config.lr);
}

NetBackend::NetBackend(WeightedNet baseline, SyntheticDataset data, NetBackendOptions options)
    : baseline_(std::move(baseline)), data_(std::move(data)), opt_(std::move(options)) {
  baseline_.check_shapes();
  if (input_size(baseline_.graph) != data_.sample_size()) throw ShapeError("net input does not match dataset samples");
  deps_ = derive_dependencies(baseline_.graph);
  groups_ = group_isomorphic(baseline_.graph);
  const int n = std::min(opt_.calibration_samples, data_.train.n);
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  calibration_ = split_batches(gather(data_.train, data_.sample_size(), rows), data_.sample_size(),
                               opt_.calibration_batch);
  structure_.vit_mode = baseline_.graph.has_attention() &&
                        baseline_.graph.dataset_profile() == DatasetProfile::kImagenetLike;
  baseline_acc_ = evaluate(baseline_, data_.val);
}

const ImportanceTable& NetBackend::scores(Criterion c) {
  auto it = scores_.find(c);
  if (it == scores_.end()) it = scores_.emplace(c, compute_scores(baseline_, c, calibration_, opt_.seed)).first;
  return it->second;
}

ProfileReport NetBackend::profile() {
  return build_profile(baseline_.graph, deps_, groups_, opt_.model_arch);
}

double NetBackend::profiling_seconds() const {
  const double base = static_cast<double>(count_total_macs(baseline_.graph));
  return 3.0 * base * opt_.calibration_samples / kVirtualMacsPerSecond;
}

double NetBackend::min_achievable_macs() {
  Strategy s;
  if (baseline_.graph.has_attention()) {
    s.mode = PruneMode::kVit;
    s.base_ratio = kMaxEffectiveRatio;
    s.multipliers = {1.0, 1.0, 1.0, 1.0};
  } else {
    s.channel_pruning_ratio = kMaxEffectiveRatio;
  }
  s.global_pruning = false;
  return static_cast<double>(predict_pruned_macs(baseline_.graph, deps_, groups_, s));
}

PruneEvaluation NetBackend::prune_and_evaluate(const Strategy& s) {
  PruneOutcome out = apply_pruning(baseline_, deps_, groups_, scores(s.criterion), s);
  const auto problems = validate_structure(out, structure_);
  if (!problems.empty()) throw InfeasibleStrategy(problems.front());
  PruneEvaluation ev;
  ev.achieved_macs = static_cast<double>(out.achieved_macs);
  ev.zero_shot_acc = evaluate(out.pruned_net, data_.val);
  ev.pruning_seconds = static_cast<double>(baseline_.parameter_count()) / kVirtualMacsPerSecond * 10.0;
  ev.evaluation_seconds = ev.achieved_macs * data_.val.n / kVirtualMacsPerSecond;
  ev.pruned = std::make_shared<const WeightedNet>(std::move(out.pruned_net));
  return ev;
}

FinetuneResult NetBackend::finetune(const PruneEvaluation& pruned) {
  TrainResult tr = inline_finetune(*pruned.pruned, data_, opt_.finetune, baseline_.parameter_count());
  FinetuneResult ft;
  ft.accuracy = tr.accuracy;
  ft.diverged = tr.diverged;
  const double rows = std::round(opt_.finetune.subset_fraction * data_.train.n);
  ft.seconds = pruned.achieved_macs * (3.0 * rows * opt_.finetune.epochs + data_.val.n) / kVirtualMacsPerSecond;
  ft.net = std::make_shared<const WeightedNet>(std::move(tr.net));
  return ft;
}

std::function<double(const Strategy&)> NetBackend::reduction_predictor() {
  const double base = static_cast<double>(count_total_macs(baseline_.graph));
  return [this, base](const Strategy& s) {
    const auto m = predict_pruned_macs(baseline_.graph, deps_, groups_, s, &scores(s.criterion));
    return 100.0 * (1.0 - static_cast<double>(m) / base);
  };
}

// ---- surface ------------------------------------------------------------------

SurfaceParams random_surface(std::uint64_t seed, PruneMode mode) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  SurfaceParams p;
  p.mode = mode;
  p.baseline_macs = std::round(1e8 * (5.0 + 40.0 * u())) * 10.0;
  p.exponent = 1.4 + 1.2 * u();
  p.base_accuracy = 70.0 + 25.0 * u();
  p.seed = rng();
  return p;
}

double SurfaceBackend::macs_at(double x) const {
  return std::round(p_.baseline_macs * std::pow(1.0 - std::clamp(x, 0.0, 1.0), p_.exponent));
}

ProfileReport SurfaceBackend::profile() {
  ProfileReport r;
  r.model_arch = "surface";
  r.dataset_profile = p_.dataset_profile;
  r.mode = p_.mode;
  r.baseline_macs = p_.baseline_macs;
  r.macs.total = static_cast<MacCount>(p_.baseline_macs);
  r.macs.baseline_macs = r.macs.total;
  r.num_classes = 10;
  r.input_size = 32;
  r.dataset_notes = "monotone response surface";
  return r;
}

double SurfaceBackend::min_achievable_macs() { return macs_at(kMaxEffectiveRatio); }

PruneEvaluation SurfaceBackend::prune_and_evaluate(const Strategy& s) {
  last_x_ = HeuristicOracle::knob(s);
  last_sig_ = signature(s);
  PruneEvaluation ev;
  ev.achieved_macs = macs_at(last_x_);
  ev.zero_shot_acc = 10.0 + (p_.base_accuracy - 10.0) * std::sqrt(1.0 - std::clamp(last_x_, 0.0, 1.0));
  ev.pruning_seconds = 0.5;
  ev.evaluation_seconds = ev.achieved_macs / kVirtualMacsPerSecond;
  return ev;
}

FinetuneResult SurfaceBackend::finetune(const PruneEvaluation& pruned) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : last_sig_) h = (h ^ c) * 1099511628211ULL;
  std::mt19937_64 rng(p_.seed ^ h);
  const double jitter = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  FinetuneResult ft;
  ft.accuracy = pruned.zero_shot_acc + 0.5 * (p_.base_accuracy - pruned.zero_shot_acc) + jitter;
  ft.seconds = 5.0 * pruned.achieved_macs / kVirtualMacsPerSecond;
  return ft;
}

}  // namespace macprune

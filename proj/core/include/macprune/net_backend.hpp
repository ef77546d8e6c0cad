// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Search backends: a trained WeightedNet pruned for real, and a seeded
// monotone response surface for fast property runs.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "macprune/dataset.hpp"
#include "macprune/dependency.hpp"
#include "macprune/importance.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/orchestrator.hpp"
#include "macprune/pruner.hpp"
#include "macprune/trainer.hpp"

namespace macprune {

// Virtual clock: one unit of work is one MAC at this rate.
inline constexpr double kVirtualMacsPerSecond = 1e8;

struct NetBackendOptions {
  std::string model_arch = "model";
  int calibration_samples = 64;
  int calibration_batch = 32;
  std::uint64_t seed = 1;  // random criterion
  TrainConfig finetune = TrainConfig::cnn_inline();
};

// Trains a fresh He-initialised net on the dataset.
TrainResult pretrain_baseline(const ModelGraph& graph, const SyntheticDataset& data, const TrainConfig& config,
                              std::uint64_t init_seed);

class NetBackend : public SearchBackend {
 public:
  NetBackend(WeightedNet baseline, SyntheticDataset data, NetBackendOptions options);

  ProfileReport profile() override;
  double profiling_seconds() const override;
  double min_achievable_macs() override;
  PruneEvaluation prune_and_evaluate(const Strategy& s) override;
  FinetuneResult finetune(const PruneEvaluation& pruned) override;
  std::function<double(const Strategy&)> reduction_predictor() override;

  const ImportanceTable& scores(Criterion c);
  const WeightedNet& baseline() const { return baseline_; }
  const DependencyGraph& deps() const { return deps_; }
  const std::vector<IsomorphicGroup>& groups() const { return groups_; }
  double baseline_accuracy() const { return baseline_acc_; }

 private:
  WeightedNet baseline_;
  SyntheticDataset data_;
  NetBackendOptions opt_;
  DependencyGraph deps_;
  std::vector<IsomorphicGroup> groups_;
  std::vector<Batch> calibration_;
  std::map<Criterion, ImportanceTable> scores_;
  StructureLimits structure_;
  double baseline_acc_ = 0.0;
};

struct SurfaceParams {
  double baseline_macs = 1e9;
  PruneMode mode = PruneMode::kCnn;
  DatasetProfile dataset_profile = DatasetProfile::kSynthetic;
  double exponent = 2.0;  // achieved = M * (1 - x)^exponent
  double base_accuracy = 90.0;
  std::uint64_t seed = 0;  // accuracy jitter
};

// Randomised monotone surface: exponent in [1.4, 2.6], base accuracy in [70, 95].
SurfaceParams random_surface(std::uint64_t seed, PruneMode mode = PruneMode::kCnn);

// Achieved MACs depend only on the heuristic knob x; accuracy falls with x.
class SurfaceBackend : public SearchBackend {
 public:
  explicit SurfaceBackend(SurfaceParams params) : p_(params) {}
  ProfileReport profile() override;
  double min_achievable_macs() override;
  PruneEvaluation prune_and_evaluate(const Strategy& s) override;
  FinetuneResult finetune(const PruneEvaluation& pruned) override;

  double macs_at(double x) const;

 private:
  SurfaceParams p_;
  double last_x_ = 0.0;
  std::string last_sig_;
};

}  // namespace macprune

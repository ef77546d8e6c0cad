// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale training and evaluation.

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "macprune/dataset.hpp"
#include "macprune/network.hpp"

namespace macprune {

enum class Optimizer { kSgd, kAdamW };
std::string_view to_string(Optimizer o);

struct TrainConfig {
  int epochs = 5;
  double subset_fraction = 0.3;
  int batch_size = 32;
  Optimizer optimizer = Optimizer::kSgd;
  double lr = 0.01;
  // Used instead of lr when the pruned net lost more than heavy_prune_threshold of its parameters.
  double reduced_lr = 0.0005;
  double heavy_prune_threshold = 0.15;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 5e-4;
  double label_smoothing = 0.05;
  double clip_norm = 1.0;  // global L2 norm; <= 0 disables
  std::uint64_t seed = 11;

  static TrainConfig cnn_inline();
  static TrainConfig vit_inline();
  // Baseline fixture training: full train split, 20 epochs, no smoothing.
  static TrainConfig pretrain();
};

nlohmann::ordered_json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base);

struct TrainResult {
  WeightedNet net;
  double accuracy = 0.0;  // validation, percent
  double final_loss = 0.0;
  double learning_rate = 0.0;
  int steps = 0;
  bool diverged = false;
};

// Top-1 accuracy in percent. Throws ShapeError when the batch does not fit the net.
double evaluate(const WeightedNet& net, const Batch& data);

// Trains on `train` (already subset) and reports accuracy on `val`.
TrainResult train(const WeightedNet& net, const Batch& train_data, const Batch& val, const TrainConfig& config,
                  double learning_rate);

// Stratified subset of the train split, learning rate chosen from the
// parameter reduction against `baseline_params`.
TrainResult inline_finetune(const WeightedNet& net, const SyntheticDataset& data, const TrainConfig& config,
                            std::size_t baseline_params);

}  // namespace macprune

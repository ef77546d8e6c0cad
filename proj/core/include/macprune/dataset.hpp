// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded class-conditional Gaussian image blobs.

#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "macprune/network.hpp"

namespace macprune {

struct DatasetParams {
  int classes = 10;
  int samples = 1000;  // train + val
  int channels = 3;
  int height = 8;
  int width = 8;
  double noise = 1.0;  // per-pixel std around the class prototype
  double val_fraction = 0.2;
  std::uint64_t seed = 7;
};

nlohmann::ordered_json to_json(const DatasetParams& p);
DatasetParams dataset_params_from_json(const nlohmann::json& doc, DatasetParams base = {});

struct SyntheticDataset {
  DatasetParams params;
  Batch train;
  Batch val;

  int sample_size() const { return params.channels * params.height * params.width; }
};

// Throws std::invalid_argument on classes < 2, samples < classes or bad shape.
SyntheticDataset generate_dataset(const DatasetParams& params);

// Stratified subset of `fraction` of the rows (at least one per present class), seed-deterministic.
Batch stratified_subset(const Batch& data, int sample_size, double fraction, std::uint64_t seed);

// Consecutive slices of at most `batch_size` rows.
std::vector<Batch> split_batches(const Batch& data, int sample_size, int batch_size);

// Rows in `order`, copied.
Batch gather(const Batch& data, int sample_size, const std::vector<int>& order);

}  // namespace macprune

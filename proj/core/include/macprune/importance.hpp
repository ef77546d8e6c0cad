// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macprune/network.hpp"
#include "macprune/strategy.hpp"

namespace macprune {

// Per-channel scores for the output units of every groupable layer. A qkv
// unit i covers weight rows {i, D+i, 2D+i}.
struct ImportanceTable {
  Criterion criterion = Criterion::kTaylor;
  std::optional<std::uint64_t> seed;  // random criterion only
  std::map<std::string, std::vector<double>> scores;

  double score(const std::string& layer_id, int channel) const;
  bool covers(const ModelGraph& graph) const;  // exactly the groupable channels
};

nlohmann::ordered_json to_json(const ImportanceTable& table);
ImportanceTable importance_from_json(const nlohmann::json& doc);

enum class NormKind { kL1, kL2 };

// Sum over calibration batches of sum_w |dL/dw * w| per output channel
// (bias included).
ImportanceTable taylor_scores(const WeightedNet& net, const std::vector<Batch>& calibration);
ImportanceTable magnitude_scores(const WeightedNet& net, NormKind norm);
ImportanceTable random_scores(const ModelGraph& graph, std::uint64_t seed);

// Dispatch on criterion.
ImportanceTable compute_scores(const WeightedNet& net, Criterion criterion,
                               const std::vector<Batch>& calibration, std::uint64_t seed);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace macprune

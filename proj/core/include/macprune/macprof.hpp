// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact multiply-accumulate accounting over a ModelGraph.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "macprune/dependency.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/netgraph.hpp"

namespace macprune {

using MacCount = std::int64_t;

struct Strategy;
struct ImportanceTable;

// conv2d: out_h*out_w*out*in*kh*kw / groups.
// dense kinds: tokens*in*out with tokens = out_h*out_w. qkv-projection also
// carries the token mixing of its heads: 2*T^2*(out/3).
// norm, pool, residual-add, input: 0.
MacCount count_layer_macs(const LayerNode& layer);

inline constexpr const char* kRemainderBucket = "(remainder)";

struct MacReport {
  std::vector<std::string> layer_order;    // graph declaration order
  std::map<std::string, MacCount> per_layer;
  std::map<std::string, MacCount> per_group;  // signature -> MACs, plus kRemainderBucket
  MacCount total = 0;
  MacCount baseline_macs = 0;  // the total of the graph the report was built for
};

MacCount count_total_macs(const ModelGraph& graph);
MacCount count_parameters(const ModelGraph& graph);

MacReport count_model_macs(const ModelGraph& graph, const std::vector<IsomorphicGroup>& groups);

nlohmann::ordered_json to_json(const MacReport& report);
// Aligned columns: layer, kind, shape, MACs, share of total.
std::string to_table(const MacReport& report, const ModelGraph& graph);

// MACs of the graph the pruner would produce for the same inputs. Passing
// the importance table the pruner uses makes the result exact under global
// pruning; without scores, global allocation falls back to per-group quotas.
MacCount predict_pruned_macs(const ModelGraph& graph, const DependencyGraph& deps,
                             const std::vector<IsomorphicGroup>& groups, const Strategy& strategy,
                             const ImportanceTable* scores = nullptr);

struct ToleranceBand {
  double overshoot_pct = 5.0;
  double undershoot_pct = 15.0;
};

// "+5/-15", "5/15", "+1.0/-20"
ToleranceBand parse_band(const std::string& text);
std::string format_band(const ToleranceBand& band);

enum class MacStatus { kValid, kOvershoot, kUndershoot };
std::string_view to_string(MacStatus s);

inline constexpr double kPercentSlack = 1e-9;

double mac_error_pct(double achieved, double target);
MacStatus within_tolerance(double achieved, double target, const ToleranceBand& band);

}  // namespace macprune

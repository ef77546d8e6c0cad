// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structured channel removal. Every plan is computed against the pristine
// baseline; nothing here mutates its inputs.

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "macprune/dependency.hpp"
#include "macprune/importance.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "macprune/network.hpp"
#include "macprune/strategy.hpp"

namespace macprune {

class InfeasibleStrategy : public std::runtime_error {
 public:
  explicit InfeasibleStrategy(const std::string& what) : std::runtime_error(what) {}
};

// max(round_to, floor(original*(1-ratio)/round_to)*round_to), capped at original.
int kept_count(int original, double effective_ratio, int round_to);

struct RankedUnit {
  std::string layer_id;
  int index = 0;
  double score = 0.0;
  bool operator==(const RankedUnit&) const = default;
};

// Ascending score within each isomorphic group; ties by (layer id, index).
// Throws std::out_of_range when a member has no scores.
std::vector<std::vector<RankedUnit>> rank_within_groups(const ImportanceTable& scores,
                                                        const std::vector<IsomorphicGroup>& groups);

// Multiplier key that drives one coupled group. Attention groups (those
// carrying a qkv output) report kQkv; their head count is driven by kHead.
MultiplierKey coupled_group_key(const ModelGraph& graph, const CoupledGroup& group);

struct PrunePlan {
  // Per coupled group: kept unit indices, sorted. Locked groups keep all.
  std::vector<std::vector<int>> kept;
  // Per coupled group: heads kept (attention groups only, else 0).
  std::vector<int> heads_kept;

  ModelGraph pruned_graph(const ModelGraph& graph, const DependencyGraph& deps) const;
};

// With scores, global pruning reallocates each isomorphic group's budget
// across its coupled groups by score; without scores every group keeps its
// own quota and the lowest indices survive.
PrunePlan plan_pruning(const ModelGraph& graph, const DependencyGraph& deps,
                       const std::vector<IsomorphicGroup>& groups, const Strategy& strategy,
                       const ImportanceTable* scores);

struct PruneOutcome {
  ModelGraph pruned_graph;
  WeightedNet pruned_net;
  std::map<std::string, std::vector<int>> kept;     // layer id -> kept output units
  std::map<std::string, int> original_out;          // layer id -> visible output units before pruning
  MacCount achieved_macs = 0;
};

PruneOutcome apply_pruning(const WeightedNet& baseline, const DependencyGraph& deps,
                           const std::vector<IsomorphicGroup>& groups, const ImportanceTable& scores,
                           const Strategy& strategy);

struct StructureLimits {
  int min_head_dim = 8;
  int min_qkv_out = 96;  // checked only when vit_mode
  double max_unit_ratio = kMaxEffectiveRatio;
  bool vit_mode = false;
};

// Empty when the outcome is structurally sound.
std::vector<std::string> validate_structure(const PruneOutcome& outcome, const StructureLimits& limits = {});

nlohmann::ordered_json kept_report(const PruneOutcome& outcome);

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "macprune/netgraph.hpp"

namespace macprune {

enum class Axis { kOutputChannels, kInputChannels };

struct AxisRef {
  std::size_t node = 0;
  Axis axis = Axis::kOutputChannels;

  auto operator<=>(const AxisRef&) const = default;
};

// A set of channel axes that must be pruned with one shared index set.
struct CoupledGroup {
  std::vector<AxisRef> members;  // sorted
  int cardinality = 0;           // units; for attention groups this is H * head_dim
  int num_heads = 0;             // > 0 when the group carries a qkv output
  bool prunable = false;
  // Lowest-id prunable node whose output axis is in the group; empty when locked.
  std::string owner;

  int head_dim() const { return num_heads > 0 ? cardinality / num_heads : 0; }
};

struct DependencyGraph {
  std::vector<CoupledGroup> coupled_groups;
  // node index -> group index of that node's output / input axis (-1 if absent).
  std::vector<int> output_group;
  std::vector<int> input_group;

  int group_of(AxisRef ref) const {
    return ref.axis == Axis::kOutputChannels ? output_group.at(ref.node)
                                             : input_group.at(ref.node);
  }
};

// Union-find over channel axes:
//  * every edge couples producer output with consumer input;
//  * norm / pool / residual-add / depthwise conv couple their own in and out;
//  * a residual-add with n producers therefore merges all n output groups.
// A group is prunable only when every output-axis member belongs to a
// prunable node (input, classifier and non-prunable nodes lock their group).
DependencyGraph derive_dependencies(const ModelGraph& graph);

std::string describe(const ModelGraph& graph, const CoupledGroup& group);

}  // namespace macprune

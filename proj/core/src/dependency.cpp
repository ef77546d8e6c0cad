// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/dependency.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace macprune {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::size_t slot(std::size_t node, Axis axis) {
  return node * 2 + (axis == Axis::kInputChannels ? 1 : 0);
}

bool is_grouped_dense_conv(const LayerNode& n) {
  return n.kind == LayerKind::kConv2d && n.groups > 1 && !n.is_depthwise();
}

// Nodes that own weights shaped by their output channels and can therefore
// drive a ranking.
bool can_own(const LayerNode& n) {
  if (!n.prunable) return false;
  if (n.kind == LayerKind::kConv2d) return n.groups == 1;
  return is_dense_kind(n.kind) && n.kind != LayerKind::kClassifier;
}

}  // namespace

DependencyGraph derive_dependencies(const ModelGraph& graph) {
  const std::size_t n = graph.size();
  DisjointSet sets(n * 2);

  for (const auto& [from, to] : graph.edges()) {
    sets.unite(slot(*graph.index_of(from), Axis::kOutputChannels),
               slot(*graph.index_of(to), Axis::kInputChannels));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const LayerNode& node = graph.node(i);
    if (is_passthrough_kind(node.kind) || node.is_depthwise()) {
      sets.unite(slot(i, Axis::kInputChannels), slot(i, Axis::kOutputChannels));
    }
  }

  std::map<std::size_t, std::vector<AxisRef>> by_root;
  for (std::size_t i = 0; i < n; ++i) {
    by_root[sets.find(slot(i, Axis::kOutputChannels))].push_back({i, Axis::kOutputChannels});
    if (graph.node(i).kind != LayerKind::kInput) {
      by_root[sets.find(slot(i, Axis::kInputChannels))].push_back({i, Axis::kInputChannels});
    }
  }

  DependencyGraph deps;
  deps.output_group.assign(n, -1);
  deps.input_group.assign(n, -1);

  std::vector<std::vector<AxisRef>> member_lists;
  member_lists.reserve(by_root.size());
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    member_lists.push_back(std::move(members));
  }
  std::sort(member_lists.begin(), member_lists.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  for (auto& members : member_lists) {
    CoupledGroup g;
    bool locked = false;
    const LayerNode* owner = nullptr;
    for (const AxisRef& ref : members) {
      const LayerNode& node = graph.node(ref.node);
      if (ref.axis == Axis::kOutputChannels) {
        if (g.cardinality == 0) g.cardinality = node.visible_out_channels();
        if (node.kind == LayerKind::kQkvProjection && g.num_heads == 0) g.num_heads = node.num_heads;
        if (!node.prunable || node.kind == LayerKind::kInput || node.kind == LayerKind::kClassifier ||
            is_grouped_dense_conv(node)) {
          locked = true;
        }
        if (can_own(node) && (owner == nullptr || node.id < owner->id)) owner = &node;
      } else {
        if (g.cardinality == 0) g.cardinality = node.in_channels;
        if (is_grouped_dense_conv(node)) locked = true;
      }
    }
    if (owner == nullptr) locked = true;
    g.prunable = !locked;
    if (g.prunable) g.owner = owner->id;
    g.members = std::move(members);

    const int index = static_cast<int>(deps.coupled_groups.size());
    for (const AxisRef& ref : g.members) {
      (ref.axis == Axis::kOutputChannels ? deps.output_group : deps.input_group)[ref.node] = index;
    }
    deps.coupled_groups.push_back(std::move(g));
  }
  return deps;
}

std::string describe(const ModelGraph& graph, const CoupledGroup& group) {
  std::ostringstream out;
  out << "[card=" << group.cardinality;
  if (group.num_heads > 0) out << " heads=" << group.num_heads;
  out << (group.prunable ? " owner=" + group.owner : std::string(" locked")) << "]";
  for (const AxisRef& ref : group.members) {
    out << ' ' << graph.node(ref.node).id << (ref.axis == Axis::kOutputChannels ? ".out" : ".in");
  }
  return out.str();
}

}  // namespace macprune

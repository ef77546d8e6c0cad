// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "macprune/netgraph.hpp"

namespace macprune {

enum class MultiplierKey { kMlp, kQkv, kProj, kHead, kCnnChannel };

std::string_view to_string(MultiplierKey key);
std::optional<MultiplierKey> parse_multiplier_key(std::string_view text);

// Kind -> key. mlp-fc1 owns the hidden width, qkv-projection the per-head
// width, attn-out-projection whole heads, mlp-fc2 the residual embedding.
MultiplierKey multiplier_key_for(LayerKind kind);

struct IsomorphicGroup {
  std::string signature;
  std::vector<std::string> members;  // layer ids, sorted
  MultiplierKey multiplier_key = MultiplierKey::kCnnChannel;
};

// Prunable weighted layers (conv2d and dense kinds other than the classifier).
// Exactly these nodes are partitioned by group_isomorphic.
bool is_groupable(const LayerNode& node);

// Canonical signature: kind, kernel shape, stride, head count, depthwise flag
// and the reduced out:in fan ratio. Independent of absolute width and depth.
std::string layer_signature(const LayerNode& node);

// Partitions the groupable nodes by signature; groups sorted by signature.
std::vector<IsomorphicGroup> group_isomorphic(const ModelGraph& graph);

// Index of the group containing `layer_id`, if any.
std::optional<std::size_t> find_group(const std::vector<IsomorphicGroup>& groups,
                                      std::string_view layer_id);

}  // namespace macprune

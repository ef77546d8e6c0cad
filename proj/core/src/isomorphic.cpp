// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/isomorphic.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>

namespace macprune {

namespace {

constexpr std::array<std::pair<MultiplierKey, std::string_view>, 5> kKeyNames{{
    {MultiplierKey::kMlp, "mlp"},
    {MultiplierKey::kQkv, "qkv"},
    {MultiplierKey::kProj, "proj"},
    {MultiplierKey::kHead, "head"},
    {MultiplierKey::kCnnChannel, "cnn-channel"},
}};

}  // namespace

std::string_view to_string(MultiplierKey key) {
  for (const auto& [k, name] : kKeyNames) {
    if (k == key) return name;
  }
  return "unknown";
}

std::optional<MultiplierKey> parse_multiplier_key(std::string_view text) {
  for (const auto& [k, name] : kKeyNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

MultiplierKey multiplier_key_for(LayerKind kind) {
  switch (kind) {
    case LayerKind::kMlpFc1:
      return MultiplierKey::kMlp;
    case LayerKind::kQkvProjection:
      return MultiplierKey::kQkv;
    case LayerKind::kAttnOutProjection:
      return MultiplierKey::kHead;
    case LayerKind::kMlpFc2:
      return MultiplierKey::kProj;
    default:
      return MultiplierKey::kCnnChannel;
  }
}

bool is_groupable(const LayerNode& node) {
  if (!node.prunable) return false;
  if (node.kind == LayerKind::kConv2d) return true;
  return is_dense_kind(node.kind) && node.kind != LayerKind::kClassifier;
}

std::string layer_signature(const LayerNode& node) {
  const int g = std::max(1, node.groups);
  int fan_out = node.out_channels / g;
  int fan_in = node.in_channels / g;
  const int d = std::gcd(fan_out, fan_in);
  if (d > 0) {
    fan_out /= d;
    fan_in /= d;
  }
  std::string sig(to_string(node.kind));
  sig += "|k" + std::to_string(node.kernel_h) + "x" + std::to_string(node.kernel_w);
  sig += "|s" + std::to_string(node.stride);
  sig += "|h" + std::to_string(node.num_heads);
  sig += node.is_depthwise() ? "|dw" : "|dense";
  sig += "|fan" + std::to_string(fan_out) + ":" + std::to_string(fan_in);
  return sig;
}

std::vector<IsomorphicGroup> group_isomorphic(const ModelGraph& graph) {
  std::map<std::string, IsomorphicGroup> by_sig;
  for (const auto& node : graph.nodes()) {
    if (!is_groupable(node)) continue;
    auto sig = layer_signature(node);
    auto& group = by_sig[sig];
    if (group.members.empty()) {
      group.signature = sig;
      group.multiplier_key = multiplier_key_for(node.kind);
    }
    group.members.push_back(node.id);
  }
  std::vector<IsomorphicGroup> out;
  out.reserve(by_sig.size());
  for (auto& [sig, group] : by_sig) {
    std::sort(group.members.begin(), group.members.end());
    out.push_back(std::move(group));
  }
  return out;
}

std::optional<std::size_t> find_group(const std::vector<IsomorphicGroup>& groups,
                                      std::string_view layer_id) {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& m = groups[i].members;
    if (std::binary_search(m.begin(), m.end(), layer_id, std::less<>())) return i;
  }
  return std::nullopt;
}

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/netgraph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <queue>
#include <set>
#include <sstream>

namespace macprune {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 11> kKindNames{{
    {LayerKind::kConv2d, "conv2d"},
    {LayerKind::kLinear, "linear"},
    {LayerKind::kNorm, "norm"},
    {LayerKind::kQkvProjection, "qkv-projection"},
    {LayerKind::kAttnOutProjection, "attn-out-projection"},
    {LayerKind::kMlpFc1, "mlp-fc1"},
    {LayerKind::kMlpFc2, "mlp-fc2"},
    {LayerKind::kResidualAdd, "residual-add"},
    {LayerKind::kPool, "pool"},
    {LayerKind::kClassifier, "classifier"},
    {LayerKind::kInput, "input"},
}};

constexpr std::array<std::pair<DatasetProfile, std::string_view>, 3> kProfileNames{{
    {DatasetProfile::kImagenetLike, "imagenet-like"},
    {DatasetProfile::kCifarLike, "cifar-like"},
    {DatasetProfile::kSynthetic, "synthetic"},
}};

std::string edge_name(const std::string& a, const std::string& b) { return a + "->" + b; }

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string_view to_string(DatasetProfile profile) {
  for (const auto& [p, name] : kProfileNames) {
    if (p == profile) return name;
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::optional<DatasetProfile> parse_dataset_profile(std::string_view text) {
  for (const auto& [p, name] : kProfileNames) {
    if (name == text) return p;
  }
  return std::nullopt;
}

bool is_dense_kind(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear:
    case LayerKind::kQkvProjection:
    case LayerKind::kAttnOutProjection:
    case LayerKind::kMlpFc1:
    case LayerKind::kMlpFc2:
    case LayerKind::kClassifier:
      return true;
    default:
      return false;
  }
}

bool is_passthrough_kind(LayerKind kind) {
  return kind == LayerKind::kNorm || kind == LayerKind::kPool ||
         kind == LayerKind::kResidualAdd;
}

int spatial_padding(int kernel, int stride) { return std::max(0, (kernel - stride + 1) / 2); }

int conv_output_extent(int in_extent, int kernel, int stride) {
  const int pad = spatial_padding(kernel, stride);
  return (in_extent + 2 * pad - kernel) / stride + 1;
}

ModelGraph::ModelGraph(std::vector<LayerNode> nodes,
                       std::vector<std::pair<std::string, std::string>> edges,
                       DatasetProfile profile)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), profile_(profile) {
  validate_and_index();
}

const LayerNode& ModelGraph::node(std::string_view id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::out_of_range("unknown layer id '" + std::string(id) + "'");
  }
  return nodes_[it->second];
}

std::optional<std::size_t> ModelGraph::index_of(std::string_view id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool ModelGraph::has_attention() const {
  return std::any_of(nodes_.begin(), nodes_.end(), [](const LayerNode& n) {
    return n.kind == LayerKind::kQkvProjection;
  });
}

ModelGraph ModelGraph::with_nodes(std::vector<LayerNode> nodes) const {
  return ModelGraph(std::move(nodes), edges_, profile_);
}

void ModelGraph::validate_and_index() {
  if (nodes_.empty()) throw ValidationError("graph has no nodes");

  index_.clear();
  std::size_t input_count = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const LayerNode& n = nodes_[i];
    if (n.id.empty()) throw ValidationError("node #" + std::to_string(i) + " has an empty id");
    if (!index_.emplace(n.id, i).second) {
      throw ValidationError("duplicate node id '" + n.id + "'");
    }
    if (n.in_channels < 1 || n.out_channels < 1 || n.kernel_h < 1 || n.kernel_w < 1 ||
        n.stride < 1 || n.out_h < 1 || n.out_w < 1 || n.groups < 1 || n.num_heads < 0) {
      throw ValidationError("node '" + n.id + "' has a non-positive dimension field");
    }
    if (n.kind == LayerKind::kInput) {
      ++input_count;
      input_ = i;
    }
    if (is_passthrough_kind(n.kind) && n.in_channels != n.out_channels) {
      throw ValidationError("node '" + n.id + "' (" + std::string(to_string(n.kind)) +
                            ") must keep in_channels == out_channels");
    }
    if (n.groups > 1) {
      if (n.kind != LayerKind::kConv2d || n.in_channels % n.groups != 0 ||
          n.out_channels % n.groups != 0) {
        throw ValidationError("node '" + n.id + "' has an invalid group count");
      }
    }
    if (n.kind == LayerKind::kQkvProjection) {
      if (n.num_heads < 1) throw ValidationError("qkv node '" + n.id + "' needs heads=N");
      if (n.out_channels % 3 != 0 || n.out_channels % n.num_heads != 0) {
        throw ValidationError("qkv node '" + n.id + "' out_channels " +
                              std::to_string(n.out_channels) +
                              " must be divisible by 3 and by num_heads");
      }
    }
  }
  if (input_count != 1) {
    throw ValidationError("graph must have exactly one input node, found " +
                          std::to_string(input_count));
  }

  inputs_.assign(nodes_.size(), {});
  outputs_.assign(nodes_.size(), {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [from, to] : edges_) {
    const auto a = index_of(from);
    const auto b = index_of(to);
    if (!a) throw ValidationError("edge " + edge_name(from, to) + " references undefined '" + from + "'");
    if (!b) throw ValidationError("edge " + edge_name(from, to) + " references undefined '" + to + "'");
    if (*a == *b) throw ValidationError("edge " + edge_name(from, to) + " is a self-loop");
    if (!seen.emplace(*a, *b).second) throw ValidationError("duplicate edge " + edge_name(from, to));
    outputs_[*a].push_back(*b);
    inputs_[*b].push_back(*a);
  }

  // Kahn's algorithm; the min-heap on declaration index keeps the order stable.
  std::vector<std::size_t> indegree(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) indegree[i] = inputs_[i].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  topo_.clear();
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    topo_.push_back(i);
    for (std::size_t j : outputs_[i]) {
      if (--indegree[j] == 0) ready.push(j);
    }
  }
  if (topo_.size() != nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (indegree[i] > 0) throw ValidationError("cycle through node '" + nodes_[i].id + "'");
    }
  }

  std::vector<bool> reached(nodes_.size(), false);
  std::deque<std::size_t> frontier{input_};
  reached[input_] = true;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop_front();
    for (std::size_t j : outputs_[i]) {
      if (!reached[j]) {
        reached[j] = true;
        frontier.push_back(j);
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!reached[i]) throw ValidationError("node '" + nodes_[i].id + "' is unreachable from the input");
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const LayerNode& n = nodes_[i];
    const auto& producers = inputs_[i];
    if (n.kind == LayerKind::kInput) {
      if (!producers.empty()) throw ValidationError("input node '" + n.id + "' has producers");
      continue;
    }
    if (n.kind != LayerKind::kResidualAdd && producers.size() != 1) {
      throw ValidationError("node '" + n.id + "' must have exactly one producer, has " +
                            std::to_string(producers.size()));
    }
    for (std::size_t p : producers) {
      const LayerNode& src = nodes_[p];
      if (src.visible_out_channels() != n.in_channels) {
        throw ValidationError("channel mismatch on edge " + edge_name(src.id, n.id) + ": producer emits " +
                              std::to_string(src.visible_out_channels()) + ", consumer expects " +
                              std::to_string(n.in_channels));
      }
      int expect_h = src.out_h;
      int expect_w = src.out_w;
      if (n.kind == LayerKind::kConv2d ||
          (n.kind == LayerKind::kPool && !(n.out_h == 1 && n.out_w == 1))) {
        expect_h = conv_output_extent(src.out_h, n.kernel_h, n.stride);
        expect_w = conv_output_extent(src.out_w, n.kernel_w, n.stride);
      } else if (n.kind == LayerKind::kPool) {
        expect_h = 1;
        expect_w = 1;
      }
      if (expect_h != n.out_h || expect_w != n.out_w) {
        throw ValidationError("spatial mismatch on edge " + edge_name(src.id, n.id) + ": expected " +
                              std::to_string(expect_h) + "x" + std::to_string(expect_w) + ", node declares " +
                              std::to_string(n.out_h) + "x" + std::to_string(n.out_w));
      }
    }
  }

  // Classifiers and the first convolution reached from the input never prune.
  for (auto& n : nodes_) {
    if (n.kind == LayerKind::kClassifier || n.kind == LayerKind::kInput) n.prunable = false;
  }
  std::vector<bool> visited(nodes_.size(), false);
  std::deque<std::size_t> walk{input_};
  visited[input_] = true;
  while (!walk.empty()) {
    const std::size_t i = walk.front();
    walk.pop_front();
    for (std::size_t j : outputs_[i]) {
      if (visited[j]) continue;
      visited[j] = true;
      if (nodes_[j].kind == LayerKind::kConv2d) {
        nodes_[j].prunable = false;
      } else {
        walk.push_back(j);
      }
    }
  }
}

}  // namespace macprune

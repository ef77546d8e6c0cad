// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative layer-graph IR used by every other module. A graph is a DAG
// of layer nodes; edges carry channel tensors from producer to consumer.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace macprune {

enum class LayerKind {
  kConv2d,
  kLinear,
  kNorm,
  kQkvProjection,
  kAttnOutProjection,
  kMlpFc1,
  kMlpFc2,
  kResidualAdd,
  kPool,
  kClassifier,
  kInput,
};

enum class DatasetProfile { kImagenetLike, kCifarLike, kSynthetic };

std::string_view to_string(LayerKind kind);
std::string_view to_string(DatasetProfile profile);
std::optional<LayerKind> parse_layer_kind(std::string_view text);
std::optional<DatasetProfile> parse_dataset_profile(std::string_view text);

// Kinds that apply a dense per-position matrix (weights shaped out x in x 1 x 1).
bool is_dense_kind(LayerKind kind);
// Kinds whose input and output channel axes are the same tensor axis.
bool is_passthrough_kind(LayerKind kind);

struct LayerNode {
  std::string id;
  LayerKind kind = LayerKind::kConv2d;
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int out_h = 1;
  int out_w = 1;
  int num_heads = 0;
  // Convolution group count; groups == in_channels == out_channels is depthwise.
  int groups = 1;
  bool prunable = true;

  bool is_depthwise() const {
    return kind == LayerKind::kConv2d && groups > 1 && groups == in_channels &&
           groups == out_channels;
  }
  int tokens() const { return out_h * out_w; }
  // Channel count seen by consumers. qkv emits 3*D rows but mixes them back to D.
  int visible_out_channels() const {
    return kind == LayerKind::kQkvProjection ? out_channels / 3 : out_channels;
  }
  int head_dim() const {
    return num_heads > 0 ? out_channels / (3 * num_heads) : 0;
  }
};

// Thrown when a textual or JSON model description cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a parsed graph violates a structural invariant. The message
// names the offending node or edge.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class ModelGraph {
 public:
  ModelGraph() = default;

  // Builds and validates. Classifier nodes and the first convolution on the
  // input path are forced non-prunable.
  ModelGraph(std::vector<LayerNode> nodes,
             std::vector<std::pair<std::string, std::string>> edges,
             DatasetProfile profile = DatasetProfile::kSynthetic);

  const std::vector<LayerNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
  DatasetProfile dataset_profile() const { return profile_; }

  std::size_t size() const { return nodes_.size(); }
  const LayerNode& node(std::size_t index) const { return nodes_.at(index); }
  const LayerNode& node(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

  // Producers / consumers by node index, in edge order.
  const std::vector<std::size_t>& inputs_of(std::size_t index) const { return inputs_.at(index); }
  const std::vector<std::size_t>& outputs_of(std::size_t index) const { return outputs_.at(index); }

  // Deterministic topological order (Kahn's algorithm, ties by declaration order).
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  std::size_t input_index() const { return input_; }

  bool has_attention() const;

  // Same graph with node dimension fields replaced; re-validated.
  ModelGraph with_nodes(std::vector<LayerNode> nodes) const;

 private:
  void validate_and_index();

  std::vector<LayerNode> nodes_;
  std::vector<std::pair<std::string, std::string>> edges_;
  DatasetProfile profile_ = DatasetProfile::kSynthetic;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::vector<std::size_t>> inputs_;
  std::vector<std::vector<std::size_t>> outputs_;
  std::vector<std::size_t> topo_;
  std::size_t input_ = 0;
};

// Padding used by convolution and pooling nodes.
int spatial_padding(int kernel, int stride);
int conv_output_extent(int in_extent, int kernel, int stride);

// Line-oriented text format:
//   dataset: cifar-like
//   conv1 conv2d 3 16 3 3 1 16 16 [heads=N] [groups=N] [prunable=0]
//   edges: input->conv1, conv1->conv2
// '#' starts a comment; a trailing "; edges: ..." on a node line is accepted.
ModelGraph load_graph(std::string_view spec_text);
ModelGraph load_graph_json(std::string_view json_text);
// Dispatches on the first non-space character ('{' means JSON).
ModelGraph load_graph_any(std::string_view text);
ModelGraph load_graph_file(const std::string& path);

std::string to_text(const ModelGraph& graph);
std::string to_json_text(const ModelGraph& graph);

}  // namespace macprune

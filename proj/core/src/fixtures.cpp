// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/fixtures.hpp"

#include <stdexcept>
#include <utility>

namespace macprune {

namespace {

class Builder {
 public:
  explicit Builder(DatasetProfile profile) : profile_(profile) {}

  std::string input(int c, int h, int w) {
    LayerNode n;
    n.id = "input";
    n.kind = LayerKind::kInput;
    n.in_channels = c;
    n.out_channels = c;
    n.out_h = h;
    n.out_w = w;
    return add(std::move(n), {});
  }

  std::string conv(const std::string& id, const std::string& from, int out, int k, int stride) {
    const LayerNode& src = get(from);
    LayerNode n;
    n.id = id;
    n.kind = LayerKind::kConv2d;
    n.in_channels = src.visible_out_channels();
    n.out_channels = out;
    n.kernel_h = k;
    n.kernel_w = k;
    n.stride = stride;
    n.out_h = conv_output_extent(src.out_h, k, stride);
    n.out_w = conv_output_extent(src.out_w, k, stride);
    return add(std::move(n), {from});
  }

  std::string pool(const std::string& id, const std::string& from, int k = 0, int stride = 1) {
    const LayerNode& src = get(from);
    LayerNode n;
    n.id = id;
    n.kind = LayerKind::kPool;
    n.in_channels = src.visible_out_channels();
    n.out_channels = n.in_channels;
    if (k > 0) {
      n.kernel_h = k;
      n.kernel_w = k;
      n.stride = stride;
      n.out_h = conv_output_extent(src.out_h, k, stride);
      n.out_w = conv_output_extent(src.out_w, k, stride);
    }
    return add(std::move(n), {from});
  }

  std::string dense(const std::string& id, LayerKind kind, const std::string& from, int out, int heads = 0) {
    const LayerNode& src = get(from);
    LayerNode n;
    n.id = id;
    n.kind = kind;
    n.in_channels = src.visible_out_channels();
    n.out_channels = out;
    n.out_h = src.out_h;
    n.out_w = src.out_w;
    n.num_heads = heads;
    return add(std::move(n), {from});
  }

  std::string norm(const std::string& id, const std::string& from) {
    const LayerNode& src = get(from);
    LayerNode n;
    n.id = id;
    n.kind = LayerKind::kNorm;
    n.in_channels = src.visible_out_channels();
    n.out_channels = n.in_channels;
    n.out_h = src.out_h;
    n.out_w = src.out_w;
    return add(std::move(n), {from});
  }

  std::string residual(const std::string& id, const std::string& a, const std::string& b) {
    const LayerNode& src = get(a);
    LayerNode n;
    n.id = id;
    n.kind = LayerKind::kResidualAdd;
    n.in_channels = src.visible_out_channels();
    n.out_channels = n.in_channels;
    n.out_h = src.out_h;
    n.out_w = src.out_w;
    return add(std::move(n), {a, b});
  }

  std::string vit_block(const std::string& p, const std::string& from, int dim, int heads, int hidden) {
    const std::string n1 = norm(p + "_norm1", from);
    const std::string qkv = dense(p + "_qkv", LayerKind::kQkvProjection, n1, 3 * dim, heads);
    const std::string proj = dense(p + "_proj", LayerKind::kAttnOutProjection, qkv, dim);
    const std::string r1 = residual(p + "_add1", from, proj);
    const std::string n2 = norm(p + "_norm2", r1);
    const std::string fc1 = dense(p + "_fc1", LayerKind::kMlpFc1, n2, hidden);
    const std::string fc2 = dense(p + "_fc2", LayerKind::kMlpFc2, fc1, dim);
    return residual(p + "_add2", r1, fc2);
  }

  ModelGraph build() { return ModelGraph(nodes_, edges_, profile_); }

 private:
  const LayerNode& get(const std::string& id) const {
    for (const auto& n : nodes_) {
      if (n.id == id) return n;
    }
    throw std::logic_error("fixture builder: unknown node " + id);
  }
  std::string add(LayerNode n, std::vector<std::string> from) {
    std::string id = n.id;
    for (auto& f : from) edges_.emplace_back(std::move(f), id);
    nodes_.push_back(std::move(n));
    return id;
  }

  DatasetProfile profile_;
  std::vector<LayerNode> nodes_;
  std::vector<std::pair<std::string, std::string>> edges_;
};

}  // namespace

ModelGraph mini_resnet_graph() {
  Builder b(DatasetProfile::kSynthetic);
  auto x = b.input(3, 16, 16);
  x = b.conv("conv1", x, 8, 3, 1);
  const auto c2 = b.conv("conv2", x, 16, 3, 1);
  const auto c3 = b.conv("conv3", c2, 16, 3, 1);
  x = b.residual("add1", c2, c3);
  x = b.conv("conv4", x, 32, 3, 2);
  x = b.pool("gap", x);
  b.dense("fc", LayerKind::kClassifier, x, 10);
  return b.build();
}

ModelGraph mini_deit_graph() {
  Builder b(DatasetProfile::kSynthetic);
  auto x = b.input(3, 16, 16);
  x = b.conv("patch", x, 64, 2, 2);
  x = b.vit_block("blk1", x, 64, 4, 128);
  x = b.vit_block("blk2", x, 64, 4, 128);
  x = b.norm("norm", x);
  x = b.pool("gap", x);
  b.dense("head", LayerKind::kClassifier, x, 10);
  return b.build();
}

ModelGraph mini_mlp_graph() {
  Builder b(DatasetProfile::kSynthetic);
  auto x = b.input(16, 1, 1);
  x = b.dense("fc1", LayerKind::kLinear, x, 12);
  x = b.dense("fc2", LayerKind::kLinear, x, 12);
  b.dense("out", LayerKind::kClassifier, x, 4);
  return b.build();
}

ModelGraph resnet50_graph() {
  Builder b(DatasetProfile::kImagenetLike);
  auto x = b.input(3, 224, 224);
  x = b.conv("conv1", x, 64, 7, 2);
  x = b.pool("maxpool", x, 3, 2);
  const int blocks[] = {3, 4, 6, 3};
  const int widths[] = {64, 128, 256, 512};
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < blocks[s]; ++i) {
      const std::string p = "layer" + std::to_string(s + 1) + "_" + std::to_string(i);
      const int stride = (i == 0 && s > 0) ? 2 : 1;
      const int w = widths[s];
      auto y = b.conv(p + "_conv1", x, w, 1, 1);
      y = b.conv(p + "_conv2", y, w, 3, stride);
      y = b.conv(p + "_conv3", y, 4 * w, 1, 1);
      std::string skip = x;
      if (i == 0) skip = b.conv(p + "_down", x, 4 * w, 1, stride);
      x = b.residual(p + "_add", skip, y);
    }
  }
  x = b.pool("avgpool", x);
  b.dense("fc", LayerKind::kClassifier, x, 1000);
  return b.build();
}

ModelGraph deit_tiny_graph() {
  Builder b(DatasetProfile::kImagenetLike);
  auto x = b.input(3, 224, 224);
  x = b.conv("patch_embed", x, 192, 16, 16);
  for (int i = 0; i < 12; ++i) x = b.vit_block("blocks" + std::to_string(i), x, 192, 3, 768);
  x = b.norm("norm", x);
  x = b.pool("gap", x);
  b.dense("head", LayerKind::kClassifier, x, 1000);
  return b.build();
}

ModelGraph uniform_conv_chain_graph(int layers, int channels, int side) {
  if (layers < 2 || channels < 1 || side < 1) throw std::invalid_argument("bad conv chain shape");
  Builder b(DatasetProfile::kSynthetic);
  auto x = b.input(channels, side, side);
  for (int i = 1; i <= layers; ++i) x = b.conv("conv" + std::to_string(i), x, channels, 3, 1);
  x = b.pool("gap", x);
  b.dense("fc", LayerKind::kClassifier, x, 10);
  return b.build();
}

std::vector<std::string> fixture_names() {
  return {"mini-resnet", "mini-deit", "mini-mlp", "resnet50", "deit-tiny", "conv-chain"};
}

ModelGraph fixture_graph(const std::string& name) {
  if (name == "mini-resnet") return mini_resnet_graph();
  if (name == "mini-deit") return mini_deit_graph();
  if (name == "mini-mlp") return mini_mlp_graph();
  if (name == "resnet50") return resnet50_graph();
  if (name == "deit-tiny") return deit_tiny_graph();
  if (name == "conv-chain") return uniform_conv_chain_graph();
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

}  // namespace macprune

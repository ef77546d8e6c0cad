// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Weighted desk-scale network over a ModelGraph with a minimal reverse-mode
// differentiator. Activations are (channels, tokens) per sample.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "macprune/netgraph.hpp"

namespace macprune {

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<double> data;

  static Tensor zeros(int a, int b = 1, int c = 1, int d = 1);
  std::size_t size() const { return data.size(); }
  std::size_t offset(int a, int b, int c, int d) const {
    return ((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d;
  }
  double& at(int a, int b = 0, int c = 0, int d = 0) { return data[offset(a, b, c, d)]; }
  double at(int a, int b = 0, int c = 0, int d = 0) const { return data[offset(a, b, c, d)]; }
  bool operator==(const Tensor&) const = default;
};

// Expected (out, in/groups, kh, kw) weight shape; false for weightless kinds.
bool weight_shape(const LayerNode& node, std::array<int, 4>& shape);

struct WeightedNet {
  ModelGraph graph;
  std::map<std::string, Tensor> weights;
  std::map<std::string, Tensor> biases;

  // Throws ShapeError naming the first layer whose arrays disagree with the graph.
  void check_shapes() const;
  std::size_t parameter_count() const;
  bool operator==(const WeightedNet& other) const {
    return weights == other.weights && biases == other.biases;
  }
};

// He-normal weights, zero biases, unit norm scales.
WeightedNet init_weights(const ModelGraph& graph, std::uint64_t seed);

// Inputs are (n, channels, height, width) of the graph's input node.
struct Batch {
  int n = 0;
  std::vector<double> inputs;
  std::vector<int> labels;
};

struct Gradients {
  std::map<std::string, Tensor> weights;
  std::map<std::string, Tensor> biases;
};

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

int num_classes(const ModelGraph& graph);
int input_size(const ModelGraph& graph);  // channels * height * width

// Mean softmax cross-entropy over the batch, optionally label-smoothed.
double forward_loss(const WeightedNet& net, const Batch& batch, double label_smoothing = 0.0);
LossAndGrad forward_backward(const WeightedNet& net, const Batch& batch, double label_smoothing = 0.0);
// Row-major (n, classes) logits.
std::vector<double> forward_logits(const WeightedNet& net, const Batch& batch);
std::vector<int> predict(const WeightedNet& net, const Batch& batch);

}  // namespace macprune

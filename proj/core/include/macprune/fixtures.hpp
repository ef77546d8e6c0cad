// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Built-in model graphs: trainable desk-scale nets and structural
// ImageNet-scale graphs for MAC accounting.

#pragma once

#include <string>
#include <vector>

#include "macprune/netgraph.hpp"

namespace macprune {

// 3x16x16 input, 4 convolutions with one residual add, 10 classes.
ModelGraph mini_resnet_graph();
// 3x16x16 input, 2x2 patches, 2 blocks of width 64 with 4 heads, 10 classes.
ModelGraph mini_deit_graph();
// 16 features, two hidden linear layers of width 12, 4 classes.
ModelGraph mini_mlp_graph();
// Bottleneck [3,4,6,3] on 224x224, 1000 classes.
ModelGraph resnet50_graph();
// 12 blocks of width 192 with 3 heads on 14x14 patches, 1000 classes.
ModelGraph deit_tiny_graph();
// `layers` 3x3 convolutions of width `channels` on a `side`x`side` map.
ModelGraph uniform_conv_chain_graph(int layers = 8, int channels = 32, int side = 8);

std::vector<std::string> fixture_names();
// Throws std::invalid_argument on an unknown name.
ModelGraph fixture_graph(const std::string& name);

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "generators.hpp"
#include "macprune/dependency.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/isomorphic.hpp"

namespace macprune {
namespace {

int group_of_output(const ModelGraph& g, const DependencyGraph& d, const std::string& id) {
  return d.group_of({*g.index_of(id), Axis::kOutputChannels});
}
int group_of_input(const ModelGraph& g, const DependencyGraph& d, const std::string& id) {
  return d.group_of({*g.index_of(id), Axis::kInputChannels});
}

TEST(Dependency, ResidualCouplesBothBranches) {
  const ModelGraph g = mini_resnet_graph();
  const DependencyGraph d = derive_dependencies(g);
  EXPECT_EQ(group_of_output(g, d, "conv2"), group_of_output(g, d, "conv3"));
  EXPECT_EQ(group_of_output(g, d, "conv2"), group_of_input(g, d, "conv4"));
  EXPECT_NE(group_of_output(g, d, "conv1"), group_of_output(g, d, "conv2"));
  EXPECT_EQ(group_of_output(g, d, "conv4"), group_of_input(g, d, "fc"));
}

TEST(Dependency, ProducerAndConsumerShareAGroup) {
  testing::Rng rng(9);
  for (int i = 0; i < 25; ++i) {
    const ModelGraph g = i % 2 ? testing::random_cnn_graph(rng) : testing::random_vit_graph(rng);
    const DependencyGraph d = derive_dependencies(g);
    for (const auto& [from, to] : g.edges()) {
      const auto& src = g.node(from);
      const auto& dst = g.node(to);
      if (dst.kind == LayerKind::kInput) continue;
      if (src.kind == LayerKind::kQkvProjection) continue;  // qkv feeds proj through the attention mix
      const int a = group_of_output(g, d, from);
      const int b = group_of_input(g, d, to);
      if (a >= 0 && b >= 0) {
        EXPECT_EQ(a, b) << from << "->" << to;
      }
    }
    for (const auto& grp : d.coupled_groups) {
      EXPECT_TRUE(std::is_sorted(grp.members.begin(), grp.members.end()));
      EXPECT_GT(grp.cardinality, 0);
    }
  }
}

TEST(Dependency, VitResidualStreamIsOneGroup) {
  const ModelGraph g = mini_deit_graph();
  const DependencyGraph d = derive_dependencies(g);
  const int stream = group_of_output(g, d, "patch");
  EXPECT_EQ(group_of_output(g, d, "blk1_proj"), stream);
  EXPECT_EQ(group_of_output(g, d, "blk2_fc2"), stream);
  EXPECT_FALSE(d.coupled_groups[stream].prunable);
  const int qkv = group_of_output(g, d, "blk1_qkv");
  EXPECT_EQ(d.coupled_groups[qkv].num_heads, 4);
  EXPECT_EQ(d.coupled_groups[qkv].head_dim(), 16);
  EXPECT_NE(group_of_output(g, d, "blk1_fc1"), stream);
}

TEST(Isomorphic, IdenticalBlocksShareSignatures) {
  const ModelGraph g = mini_deit_graph();
  const auto groups = group_isomorphic(g);
  const auto fc1 = find_group(groups, "blk1_fc1");
  ASSERT_TRUE(fc1);
  EXPECT_EQ(find_group(groups, "blk2_fc1"), fc1);
  EXPECT_EQ(groups[*fc1].multiplier_key, MultiplierKey::kMlp);
  EXPECT_EQ(groups[*find_group(groups, "blk1_qkv")].multiplier_key, MultiplierKey::kQkv);
  EXPECT_NE(find_group(groups, "blk1_fc1"), find_group(groups, "blk1_fc2"));
  EXPECT_FALSE(find_group(groups, "head"));
}

TEST(Isomorphic, EveryGroupableLayerBelongsToExactlyOneGroup) {
  for (const auto& name : fixture_names()) {
    const ModelGraph g = fixture_graph(name);
    const auto groups = group_isomorphic(g);
    std::multiset<std::string> seen;
    for (const auto& grp : groups) {
      for (const auto& m : grp.members) {
        seen.insert(m);
        EXPECT_EQ(layer_signature(g.node(m)), grp.signature);
      }
    }
    for (const auto& n : g.nodes()) EXPECT_EQ(seen.count(n.id), is_groupable(n) ? 1u : 0u) << name << ":" << n.id;
  }
}

TEST(Isomorphic, ResNetStagesGroupByShape) {
  const ModelGraph g = resnet50_graph();
  const auto groups = group_isomorphic(g);
  std::size_t members = 0;
  for (const auto& grp : groups) members += grp.members.size();
  EXPECT_LT(groups.size(), members);
}

}  // namespace
}  // namespace macprune

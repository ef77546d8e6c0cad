// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "generators.hpp"
#include "macprune/dependency.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/importance.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "macprune/pruner.hpp"

namespace macprune {
namespace {

Strategy cnn(double ratio, int round_to = 1, bool global = false, Criterion c = Criterion::kL1Norm) {
  Strategy s;
  s.mode = PruneMode::kCnn;
  s.criterion = c;
  s.channel_pruning_ratio = ratio;
  s.round_to = round_to;
  s.global_pruning = global;
  return s;
}

struct Pruned {
  PruneOutcome outcome;
  MacCount predicted;
};

Pruned prune(const WeightedNet& net, const Strategy& s, const ImportanceTable& scores) {
  const DependencyGraph deps = derive_dependencies(net.graph);
  const auto groups = group_isomorphic(net.graph);
  const MacCount predicted = predict_pruned_macs(net.graph, deps, groups, s, &scores);
  return {apply_pruning(net, deps, groups, scores, s), predicted};
}

TEST(KeptCount, FloorsToRoundTo) {
  EXPECT_EQ(kept_count(64, 0.5, 8), 32);
  EXPECT_EQ(kept_count(64, 0.3, 8), 40);
  EXPECT_EQ(kept_count(10, 0.35, 4), 4);
  EXPECT_EQ(kept_count(10, 0.0, 4), 10);
  EXPECT_EQ(kept_count(3, 0.9, 4), 3);
  EXPECT_EQ(kept_count(16, 0.99, 2), 2);
  EXPECT_THROW(kept_count(0, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(kept_count(8, 0.5, 0), std::invalid_argument);
}

TEST(Pruner, PredictionMatchesExecutionOnRandomPairs) {
  testing::Rng rng(2024);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    const bool vit = i % 2 == 1;
    const ModelGraph g = vit ? testing::random_vit_graph(rng) : testing::random_cnn_graph(rng);
    const Strategy s = testing::random_strategy(rng, vit ? PruneMode::kVit : PruneMode::kCnn);
    const WeightedNet net = init_weights(g, static_cast<std::uint64_t>(i));
    const auto scores = compute_scores(net, s.criterion == Criterion::kTaylor ? Criterion::kL2Norm : s.criterion, {},
                                       static_cast<std::uint64_t>(i));
    try {
      const Pruned p = prune(net, s, scores);
      EXPECT_EQ(p.predicted, p.outcome.achieved_macs) << summarize(s);
      EXPECT_EQ(count_total_macs(p.outcome.pruned_graph), p.outcome.achieved_macs);
      EXPECT_NO_THROW(p.outcome.pruned_net.check_shapes());
      StructureLimits lim;
      lim.min_head_dim = 1;
      lim.max_unit_ratio = 1.0;
      EXPECT_TRUE(validate_structure(p.outcome, lim).empty());
      ++checked;
    } catch (const InfeasibleStrategy&) {
    }
  }
  EXPECT_GT(checked, 30);
}

TEST(Pruner, ZeroRatioKeepsEverything) {
  const WeightedNet net = init_weights(mini_resnet_graph(), 1);
  const Pruned p = prune(net, cnn(0.0), magnitude_scores(net, NormKind::kL1));
  EXPECT_EQ(p.outcome.achieved_macs, count_total_macs(net.graph));
  EXPECT_TRUE(p.outcome.pruned_net == net);
}

TEST(Pruner, BaselineIsNeverModified) {
  const WeightedNet net = init_weights(mini_deit_graph(), 2);
  const WeightedNet copy = net;
  Strategy s;
  s.mode = PruneMode::kVit;
  s.base_ratio = 0.4;
  s.multipliers = {1.0, 0.5, 0.0, 0.0};
  s.round_to = 2;
  (void)prune(net, s, magnitude_scores(net, NormKind::kL2));
  EXPECT_TRUE(net == copy);
  EXPECT_EQ(to_text(net.graph), to_text(copy.graph));
}

TEST(Pruner, RemovingDeadUnitsPreservesOutputs) {
  WeightedNet net = init_weights(mini_mlp_graph(), 3);
  for (const char* id : {"fc1", "fc2"}) {
    auto& w = net.weights.at(id);
    const std::size_t row = w.size() / static_cast<std::size_t>(w.shape[0]);
    for (int r = 0; r < w.shape[0]; r += 2) {
      std::fill(w.data.begin() + static_cast<std::ptrdiff_t>(r * row),
                w.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * row), 0.0);
      net.biases.at(id).data[r] = 0.0;
    }
  }
  const Pruned p = prune(net, cnn(0.5), magnitude_scores(net, NormKind::kL1));
  EXPECT_EQ(p.outcome.kept.at("fc1"), (std::vector<int>{1, 3, 5, 7, 9, 11}));
  EXPECT_EQ(p.outcome.pruned_graph.node("fc2").in_channels, 6);
  const Batch b = testing::sample_batch(net.graph, 5, 4);
  const auto before = forward_logits(net, b);
  const auto after = forward_logits(p.outcome.pruned_net, b);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-12);
}

TEST(Pruner, ResidualBranchesShareKeptIndices) {
  const WeightedNet net = init_weights(mini_resnet_graph(), 4);
  const Pruned p = prune(net, cnn(0.5, 2), random_scores(net.graph, 5));
  EXPECT_EQ(p.outcome.kept.at("conv2"), p.outcome.kept.at("conv3"));
  EXPECT_EQ(p.outcome.pruned_graph.node("conv4").in_channels, 8);
  EXPECT_EQ(p.outcome.pruned_graph.node("conv1").out_channels, 8);  // stem stays whole
  EXPECT_EQ(p.outcome.pruned_graph.node("fc").out_channels, 10);
}

TEST(Pruner, RoundToShapesEveryPrunedWidth) {
  const ModelGraph g = uniform_conv_chain_graph(6, 30, 6);
  const WeightedNet chain = init_weights(g, 1);
  const Pruned p = prune(chain, cnn(0.3, 4), magnitude_scores(chain, NormKind::kL1));
  for (const auto& n : p.outcome.pruned_graph.nodes()) {
    if (n.kind == LayerKind::kConv2d && n.prunable) {
      EXPECT_EQ(n.out_channels % 4, 0) << n.id;
    }
  }
}

TEST(Pruner, AttentionKeepsWholeHeadsAndAlignedDims) {
  const WeightedNet net = init_weights(mini_deit_graph(), 6);
  Strategy s;
  s.mode = PruneMode::kVit;
  s.base_ratio = 0.5;
  s.multipliers = {1.0, 0.5, 0.0, 0.5};
  s.round_to = 4;
  const Pruned p = prune(net, s, magnitude_scores(net, NormKind::kL1));
  const LayerNode& qkv = p.outcome.pruned_graph.node("blk1_qkv");
  EXPECT_EQ(qkv.num_heads, kept_count(4, 0.25, 1));
  EXPECT_EQ(qkv.head_dim(), kept_count(16, 0.25, 4));
  EXPECT_EQ(p.outcome.pruned_graph.node("blk1_proj").in_channels, qkv.num_heads * qkv.head_dim());
  EXPECT_EQ(p.outcome.pruned_graph.node("blk1_fc1").out_channels, 64);
  EXPECT_EQ(p.outcome.pruned_graph.node("blk1_fc2").out_channels, 64);
  EXPECT_EQ(p.predicted, p.outcome.achieved_macs);
}

TEST(Pruner, GlobalModeKeepsTotalQuotaPerIsomorphicGroup) {
  const ModelGraph g = uniform_conv_chain_graph(8, 32, 8);
  const WeightedNet net = init_weights(g, 7);
  const auto scores = random_scores(g, 8);
  const Pruned local = prune(net, cnn(0.4, 1, false, Criterion::kRandom), scores);
  const Pruned global = prune(net, cnn(0.4, 1, true, Criterion::kRandom), scores);
  auto total_kept = [](const PruneOutcome& o) {
    std::size_t n = 0;
    for (const auto& [id, v] : o.kept) {
      if (o.pruned_graph.node(id).kind == LayerKind::kConv2d) n += v.size();
    }
    return n;
  };
  EXPECT_EQ(total_kept(local.outcome), total_kept(global.outcome));
  EXPECT_EQ(global.predicted, global.outcome.achieved_macs);
}

TEST(Pruner, KeptReportListsLayers) {
  const WeightedNet net = init_weights(mini_resnet_graph(), 4);
  const Pruned p = prune(net, cnn(0.25, 2), magnitude_scores(net, NormKind::kL1));
  const auto j = kept_report(p.outcome);
  EXPECT_EQ(j["achieved_macs"].get<MacCount>(), p.outcome.achieved_macs);
  EXPECT_FALSE(j["layers"].empty());
}

TEST(Pruner, StructureCheckFlagsThinHeads) {
  const WeightedNet net = init_weights(mini_deit_graph(), 6);
  Strategy s;
  s.mode = PruneMode::kVit;
  s.base_ratio = 0.8;
  s.multipliers = {0.0, 1.0, 0.0, 0.0};
  s.round_to = 2;
  const Pruned p = prune(net, s, magnitude_scores(net, NormKind::kL1));
  StructureLimits lim;
  lim.vit_mode = true;
  EXPECT_FALSE(validate_structure(p.outcome, lim).empty());
}

}  // namespace
}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "generators.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "oracles.hpp"

namespace macprune {
namespace {

TEST(MacProf, ConvAndDenseMatchLoopNest) {
  testing::Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    const LayerNode conv = testing::random_conv_layer(rng);
    EXPECT_EQ(count_layer_macs(conv), testing::enumerate_macs(conv)) << conv.in_channels << "->" << conv.out_channels;
    const LayerNode dense = testing::random_linear_layer(rng);
    EXPECT_EQ(count_layer_macs(dense), testing::enumerate_macs(dense));
  }
}

TEST(MacProf, AttentionCountsScoresAndWeightedSum) {
  LayerNode qkv;
  qkv.kind = LayerKind::kQkvProjection;
  qkv.in_channels = 24;
  qkv.out_channels = 72;
  qkv.num_heads = 3;
  qkv.out_h = qkv.out_w = 5;
  EXPECT_EQ(count_layer_macs(qkv), 25 * 24 * 72 + 2 * 25 * 25 * 24);
  EXPECT_EQ(count_layer_macs(qkv), testing::enumerate_macs(qkv));
}

TEST(MacProf, ParameterFreeLayersCostNothing) {
  for (LayerKind k : {LayerKind::kNorm, LayerKind::kPool, LayerKind::kResidualAdd, LayerKind::kInput}) {
    LayerNode n;
    n.kind = k;
    n.in_channels = n.out_channels = 64;
    n.out_h = n.out_w = 7;
    EXPECT_EQ(count_layer_macs(n), 0);
  }
}

TEST(MacProf, FixtureTotalsAreFrozen) {
  EXPECT_EQ(count_total_macs(mini_resnet_graph()), 1235264);
  EXPECT_EQ(count_total_macs(mini_deit_graph()), 5292672);
  EXPECT_EQ(count_total_macs(mini_mlp_graph()), 384);
  EXPECT_EQ(count_total_macs(resnet50_graph()), 4089184256);
  EXPECT_EQ(count_total_macs(deit_tiny_graph()), 1246563840);
  EXPECT_EQ(count_total_macs(uniform_conv_chain_graph()), 4718912);
  EXPECT_EQ(count_parameters(mini_resnet_graph()), 8682);
  EXPECT_EQ(count_parameters(mini_deit_graph()), 68554);
  EXPECT_EQ(count_parameters(mini_mlp_graph()), 412);
}

TEST(MacProf, ReportBucketsSumToTotal) {
  for (const auto& name : fixture_names()) {
    const ModelGraph g = fixture_graph(name);
    const MacReport r = count_model_macs(g, group_isomorphic(g));
    MacCount layers = 0, groups = 0;
    for (const auto& [id, m] : r.per_layer) layers += m;
    for (const auto& [sig, m] : r.per_group) groups += m;
    EXPECT_EQ(layers, r.total) << name;
    EXPECT_EQ(groups, r.total) << name;
    EXPECT_EQ(r.total, count_total_macs(g));
    EXPECT_EQ(r.layer_order.size(), g.size());
  }
}

TEST(MacProf, TableAndJsonMentionEveryLayer) {
  const ModelGraph g = mini_resnet_graph();
  const MacReport r = count_model_macs(g, group_isomorphic(g));
  const std::string table = to_table(r, g);
  for (const auto& n : g.nodes()) EXPECT_NE(table.find(n.id), std::string::npos);
  EXPECT_EQ(to_json(r)["total"].get<MacCount>(), 1235264);
}

TEST(Tolerance, BandEdgesAreInclusive) {
  const ToleranceBand band{5.0, 15.0};
  const double target = 2.06e9;
  EXPECT_EQ(within_tolerance(target * 1.05, target, band), MacStatus::kValid);
  EXPECT_EQ(within_tolerance(target * 0.85, target, band), MacStatus::kValid);
  EXPECT_EQ(within_tolerance(target * 1.0501, target, band), MacStatus::kOvershoot);
  EXPECT_EQ(within_tolerance(target * 0.8499, target, band), MacStatus::kUndershoot);
  EXPECT_EQ(within_tolerance(1.65e9, target, band), MacStatus::kUndershoot);
  EXPECT_EQ(within_tolerance(1.782e9, target, band), MacStatus::kValid);
}

TEST(Tolerance, ErrorPercentIsSigned) {
  EXPECT_DOUBLE_EQ(mac_error_pct(110.0, 100.0), 10.0);
  EXPECT_DOUBLE_EQ(mac_error_pct(85.0, 100.0), -15.0);
}

TEST(Tolerance, BandParsing) {
  const ToleranceBand b = parse_band("+5/-15");
  EXPECT_DOUBLE_EQ(b.overshoot_pct, 5.0);
  EXPECT_DOUBLE_EQ(b.undershoot_pct, 15.0);
  EXPECT_DOUBLE_EQ(parse_band("2.5/10").overshoot_pct, 2.5);
  EXPECT_EQ(format_band(b), "+5/-15");
  EXPECT_THROW(parse_band("five"), std::invalid_argument);
  EXPECT_THROW(parse_band("+5"), std::invalid_argument);
}

}  // namespace
}  // namespace macprune

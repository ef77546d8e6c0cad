// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "generators.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/macprof.hpp"
#include "macprune/netgraph.hpp"

namespace macprune {
namespace {

const char* kTinyCnn = R"(dataset: synthetic
input input 3 3 1 1 1 8 8 prunable=0
c1 conv2d 3 8 3 3 1 8 8
c2 conv2d 8 8 3 3 2 4 4
gap pool 8 8 1 1 1 1 1
fc classifier 8 4 1 1 1 1 1 prunable=0
edges: input->c1->c2->gap->fc
)";

TEST(NetGraph, ParsesChainedEdges) {
  const ModelGraph g = load_graph(kTinyCnn);
  EXPECT_EQ(g.size(), 5u);
  EXPECT_EQ(g.edges().size(), 4u);
  EXPECT_EQ(g.node("c2").stride, 2);
  EXPECT_EQ(g.inputs_of(*g.index_of("c2")).size(), 1u);
  EXPECT_FALSE(g.has_attention());
}

TEST(NetGraph, TextAndJsonRoundTripEveryFixture) {
  for (const auto& name : fixture_names()) {
    SCOPED_TRACE(name);
    const ModelGraph g = fixture_graph(name);
    const ModelGraph from_text = load_graph(to_text(g));
    const ModelGraph from_json = load_graph_json(to_json_text(g));
    EXPECT_EQ(to_text(from_text), to_text(g));
    EXPECT_EQ(to_text(from_json), to_text(g));
    EXPECT_EQ(count_total_macs(from_json), count_total_macs(g));
    EXPECT_EQ(to_text(load_graph_any(to_json_text(g))), to_text(g));
  }
}

TEST(NetGraph, RandomGraphsRoundTrip) {
  testing::Rng rng(41);
  for (int i = 0; i < 30; ++i) {
    const ModelGraph g = i % 2 ? testing::random_cnn_graph(rng) : testing::random_vit_graph(rng);
    EXPECT_EQ(to_text(load_graph(to_text(g))), to_text(g));
  }
}

TEST(NetGraph, TopologicalOrderRespectsEdges) {
  const ModelGraph g = mini_deit_graph();
  std::vector<std::size_t> pos(g.size());
  for (std::size_t i = 0; i < g.topo_order().size(); ++i) pos[g.topo_order()[i]] = i;
  for (std::size_t v = 0; v < g.size(); ++v)
    for (std::size_t u : g.inputs_of(v)) EXPECT_LT(pos[u], pos[v]);
}

TEST(NetGraph, RejectsChannelMismatch) {
  std::string bad = kTinyCnn;
  bad.replace(bad.find("c2 conv2d 8 8"), 13, "c2 conv2d 6 8");
  EXPECT_THROW(load_graph(bad), ValidationError);
}

TEST(NetGraph, RejectsSpatialMismatch) {
  std::string bad = kTinyCnn;
  bad.replace(bad.find("2 4 4"), 5, "2 5 5");
  EXPECT_THROW(load_graph(bad), ValidationError);
}

TEST(NetGraph, RejectsCycle) {
  const std::string bad = std::string(kTinyCnn) + "edges: c2->c1\n";
  EXPECT_THROW(load_graph(bad), ValidationError);
}

TEST(NetGraph, RejectsUnknownKindAndBadNumbers) {
  EXPECT_THROW(load_graph("input input 3 3 1 1 1 8 8\nx widget 3 3 1 1 1 8 8\nedges: input->x\n"), ParseError);
  EXPECT_THROW(load_graph("input input 3 three 1 1 1 8 8\n"), ParseError);
  EXPECT_THROW(load_graph_json("{\"edges\": []}"), ParseError);
  EXPECT_THROW(load_graph_json("{not json"), ParseError);
}

TEST(NetGraph, RejectsDuplicateIdsAndDanglingEdges) {
  EXPECT_THROW(load_graph("input input 3 3 1 1 1 8 8\ninput conv2d 3 3 1 1 1 8 8\n"), ValidationError);
  EXPECT_THROW(load_graph("input input 3 3 1 1 1 8 8\nedges: input->ghost\n"), ValidationError);
}

TEST(NetGraph, QkvNeedsHeadsDividingWidth) {
  testing::GraphBuilder b(3, 4);
  const auto p = b.conv("input", 12, 2, 2, false);
  b.dense(p, LayerKind::kQkvProjection, 36, 5);
  EXPECT_THROW(b.build(), ValidationError);
}

TEST(NetGraph, ConvOutputExtentMatchesSamePadding) {
  EXPECT_EQ(conv_output_extent(16, 3, 1), 16);
  EXPECT_EQ(conv_output_extent(16, 3, 2), 8);
  EXPECT_EQ(conv_output_extent(15, 3, 2), 8);
  EXPECT_EQ(conv_output_extent(224, 16, 16), 14);
}

TEST(NetGraph, FixtureShapes) {
  EXPECT_TRUE(mini_deit_graph().has_attention());
  EXPECT_EQ(deit_tiny_graph().dataset_profile(), DatasetProfile::kImagenetLike);
  EXPECT_EQ(resnet50_graph().dataset_profile(), DatasetProfile::kImagenetLike);
  EXPECT_THROW(fixture_graph("no-such-model"), std::invalid_argument);
}

}  // namespace
}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "macprune/dataset.hpp"
#include "macprune/dependency.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/importance.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/macprof.hpp"
#include "macprune/net_backend.hpp"
#include "macprune/pruner.hpp"

namespace {

using namespace macprune;

void BM_CountMacsResNet50(benchmark::State& state) {
  const ModelGraph g = resnet50_graph();
  const auto groups = group_isomorphic(g);
  for (auto _ : state) benchmark::DoNotOptimize(count_model_macs(g, groups).total);
}
BENCHMARK(BM_CountMacsResNet50);

void BM_DeriveDependenciesDeitTiny(benchmark::State& state) {
  const ModelGraph g = deit_tiny_graph();
  for (auto _ : state) benchmark::DoNotOptimize(derive_dependencies(g).coupled_groups.size());
}
BENCHMARK(BM_DeriveDependenciesDeitTiny);

void BM_PredictPrunedMacs(benchmark::State& state) {
  const ModelGraph g = state.range(0) == 0 ? resnet50_graph() : deit_tiny_graph();
  const auto deps = derive_dependencies(g);
  const auto groups = group_isomorphic(g);
  const ImportanceTable scores = random_scores(g, 1);
  Strategy s;
  if (g.has_attention()) {
    s.mode = PruneMode::kVit;
    s.base_ratio = 0.4;
    s.multipliers = {1.0, 0.5, 0.0, 0.0};
  } else {
    s.channel_pruning_ratio = 0.3;
  }
  s.round_to = 2;
  for (auto _ : state) benchmark::DoNotOptimize(predict_pruned_macs(g, deps, groups, s, &scores));
}
BENCHMARK(BM_PredictPrunedMacs)->Arg(0)->Arg(1);

void BM_ForwardBackward(benchmark::State& state) {
  const ModelGraph g = state.range(0) == 0 ? mini_resnet_graph() : mini_deit_graph();
  const WeightedNet net = init_weights(g, 1);
  const LayerNode& in = g.node(g.input_index());
  DatasetParams p;
  p.channels = in.out_channels;
  p.height = in.out_h;
  p.width = in.out_w;
  p.samples = 80;
  const SyntheticDataset d = generate_dataset(p);
  const Batch batch = split_batches(d.train, d.sample_size(), 16).front();
  for (auto _ : state) benchmark::DoNotOptimize(forward_backward(net, batch).loss);
  state.SetItemsProcessed(state.iterations() * batch.n);
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ApplyPruningMiniResNet(benchmark::State& state) {
  const WeightedNet net = init_weights(mini_resnet_graph(), 1);
  const auto deps = derive_dependencies(net.graph);
  const auto groups = group_isomorphic(net.graph);
  const ImportanceTable scores = magnitude_scores(net, NormKind::kL1);
  Strategy s;
  s.channel_pruning_ratio = 0.4;
  s.round_to = 2;
  for (auto _ : state) benchmark::DoNotOptimize(apply_pruning(net, deps, groups, scores, s).achieved_macs);
}
BENCHMARK(BM_ApplyPruningMiniResNet);

}  // namespace

BENCHMARK_MAIN();

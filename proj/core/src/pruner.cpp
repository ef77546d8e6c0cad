// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>

namespace macprune {

namespace {

constexpr double kGlobalFloorFraction = 0.15;

int ceil_to_multiple(int v, int m) { return (v + m - 1) / m * m; }

bool has_out_kind(const ModelGraph& graph, const CoupledGroup& g, LayerKind kind) {
  return std::any_of(g.members.begin(), g.members.end(), [&](const AxisRef& a) {
    return a.axis == Axis::kOutputChannels && graph.node(a.node).kind == kind;
  });
}

// Sum of table scores over the group's groupable output members, per unit.
std::vector<double> unit_scores(const ModelGraph& graph, const CoupledGroup& g, const ImportanceTable& table) {
  std::vector<double> s(g.cardinality, 0.0);
  for (const AxisRef& a : g.members) {
    if (a.axis != Axis::kOutputChannels) continue;
    const LayerNode& n = graph.node(a.node);
    if (!is_groupable(n)) continue;
    const auto it = table.scores.find(n.id);
    if (it == table.scores.end()) throw std::out_of_range("no importance scores for layer '" + n.id + "'");
    if (static_cast<int>(it->second.size()) != g.cardinality) {
      throw std::out_of_range("score count for '" + n.id + "' disagrees with its channel count");
    }
    for (int i = 0; i < g.cardinality; ++i) s[i] += it->second[i];
  }
  return s;
}

// Indices ordered by ascending score, ties by index.
std::vector<int> ascending(const std::vector<double>& s) {
  std::vector<int> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return s[a] < s[b]; });
  return idx;
}

// Keep `count` units: the highest scored, or the first ones without scores.
std::vector<int> keep_top(int cardinality, int count, const std::vector<double>* s) {
  std::vector<int> kept;
  if (s == nullptr) {
    kept.resize(count);
    std::iota(kept.begin(), kept.end(), 0);
    return kept;
  }
  const auto order = ascending(*s);
  kept.assign(order.begin() + (cardinality - count), order.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

void check_strategy(const Strategy& s) {
  if (!is_valid_round_to(s.round_to)) {
    throw InfeasibleStrategy("round_to must be one of 1, 2, 4, 8, 16 (got " + std::to_string(s.round_to) + ")");
  }
  for (double c : s.components()) {
    if (!std::isfinite(c) || c < 0.0) throw InfeasibleStrategy("strategy has a negative or non-finite component");
  }
}

struct GroupPlan {
  double ratio = 0.0;
  int quota = 0;
  bool attention = false;
};

std::vector<int> attention_keep(const CoupledGroup& g, int dims_kept, int heads_kept, const std::vector<double>* s) {
  const int hd = g.head_dim();
  const int heads = g.num_heads;
  std::vector<double> head_score(heads, 0.0);
  if (s != nullptr) {
    for (int h = 0; h < heads; ++h) {
      for (int d = 0; d < hd; ++d) head_score[h] += (*s)[h * hd + d];
    }
  }
  std::vector<int> heads_order = ascending(head_score);
  std::vector<int> kept_heads(heads_order.begin() + (heads - heads_kept), heads_order.end());
  if (s == nullptr) {
    kept_heads.resize(heads_kept);
    std::iota(kept_heads.begin(), kept_heads.end(), 0);
  }
  std::sort(kept_heads.begin(), kept_heads.end());
  std::vector<int> kept;
  for (int h : kept_heads) {
    std::vector<double> local;
    if (s != nullptr) local.assign(s->begin() + h * hd, s->begin() + (h + 1) * hd);
    for (int d : keep_top(hd, dims_kept, s != nullptr ? &local : nullptr)) kept.push_back(h * hd + d);
  }
  return kept;
}

}  // namespace

int kept_count(int original, double effective_ratio, int round_to) {
  if (original < 1) throw std::invalid_argument("kept_count needs a positive channel count");
  if (round_to < 1) throw std::invalid_argument("round_to must be positive");
  const double r = std::clamp(effective_ratio, 0.0, 1.0);
  if (r == 0.0) return original;
  const int floored = static_cast<int>(std::floor(original * (1.0 - r) / round_to + 1e-9)) * round_to;
  return std::min(original, std::max(round_to, floored));
}

std::vector<std::vector<RankedUnit>> rank_within_groups(const ImportanceTable& scores,
                                                        const std::vector<IsomorphicGroup>& groups) {
  std::vector<std::vector<RankedUnit>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    std::vector<RankedUnit> units;
    for (const auto& id : g.members) {
      const auto it = scores.scores.find(id);
      if (it == scores.scores.end()) throw std::out_of_range("no importance scores for layer '" + id + "'");
      for (std::size_t c = 0; c < it->second.size(); ++c) {
        units.push_back({id, static_cast<int>(c), it->second[c]});
      }
    }
    std::sort(units.begin(), units.end(), [](const RankedUnit& a, const RankedUnit& b) {
      return std::tie(a.score, a.layer_id, a.index) < std::tie(b.score, b.layer_id, b.index);
    });
    out.push_back(std::move(units));
  }
  return out;
}

MultiplierKey coupled_group_key(const ModelGraph& graph, const CoupledGroup& group) {
  if (has_out_kind(graph, group, LayerKind::kQkvProjection)) return MultiplierKey::kQkv;
  if (has_out_kind(graph, group, LayerKind::kMlpFc2) || has_out_kind(graph, group, LayerKind::kAttnOutProjection)) {
    return MultiplierKey::kProj;
  }
  if (has_out_kind(graph, group, LayerKind::kMlpFc1)) return MultiplierKey::kMlp;
  if (!group.owner.empty()) return multiplier_key_for(graph.node(group.owner).kind);
  return MultiplierKey::kCnnChannel;
}

PrunePlan plan_pruning(const ModelGraph& graph, const DependencyGraph& deps,
                       const std::vector<IsomorphicGroup>& groups, const Strategy& strategy,
                       const ImportanceTable* scores) {
  check_strategy(strategy);
  const int rt = strategy.round_to;
  const std::size_t ng = deps.coupled_groups.size();

  PrunePlan plan;
  plan.kept.resize(ng);
  plan.heads_kept.assign(ng, 0);
  std::vector<GroupPlan> gp(ng);
  std::vector<std::vector<double>> gscores(ng);

  for (std::size_t i = 0; i < ng; ++i) {
    const CoupledGroup& g = deps.coupled_groups[i];
    if (scores != nullptr && g.prunable) gscores[i] = unit_scores(graph, g, *scores);
    const std::vector<double>* s = gscores[i].empty() ? nullptr : &gscores[i];
    if (!g.prunable || g.owner.empty()) {
      plan.kept[i] = keep_top(g.cardinality, g.cardinality, nullptr);
      if (g.num_heads > 0) plan.heads_kept[i] = g.num_heads;
      continue;
    }
    const MultiplierKey key = coupled_group_key(graph, g);
    if (g.num_heads > 0) {
      const int dims = kept_count(g.head_dim(), strategy.effective_ratio(MultiplierKey::kQkv), rt);
      const int heads = kept_count(g.num_heads, strategy.effective_ratio(MultiplierKey::kHead), 1);
      plan.kept[i] = attention_keep(g, dims, heads, s);
      plan.heads_kept[i] = heads;
      gp[i].attention = true;
      continue;
    }
    gp[i].ratio = strategy.effective_ratio(key);
    gp[i].quota = kept_count(g.cardinality, gp[i].ratio, rt);
    plan.kept[i] = keep_top(g.cardinality, gp[i].quota, s);
  }

  if (!strategy.global_pruning || scores == nullptr) return plan;

  // Global reallocation inside each isomorphic group.
  std::map<std::size_t, std::vector<std::size_t>> by_iso;
  for (std::size_t i = 0; i < ng; ++i) {
    const CoupledGroup& g = deps.coupled_groups[i];
    if (!g.prunable || g.owner.empty() || gp[i].attention || gp[i].ratio <= 0.0) continue;
    const auto iso = find_group(groups, g.owner);
    if (iso) by_iso[*iso].push_back(i);
  }

  struct Block {
    double mean;
    std::string owner;
    int position;
    std::size_t group;
    int size;
  };
  for (const auto& [iso, members] : by_iso) {
    if (members.size() < 2) continue;
    int budget = 0;
    std::map<std::size_t, int> kept_n;
    std::map<std::size_t, std::vector<int>> desc;
    std::vector<Block> blocks;
    for (std::size_t i : members) {
      const CoupledGroup& g = deps.coupled_groups[i];
      budget += gp[i].quota;
      const int floor_n =
          std::min(gp[i].quota, std::max(rt, ceil_to_multiple(static_cast<int>(std::ceil(kGlobalFloorFraction * g.cardinality - 1e-9)), rt)));
      kept_n[i] = floor_n;
      budget -= floor_n;
      std::vector<int> order(g.cardinality);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gscores[i][a] > gscores[i][b]; });
      int pos = 0;
      for (int start = floor_n; start < g.cardinality; start += rt, ++pos) {
        const int size = std::min(rt, g.cardinality - start);
        double sum = 0.0;
        for (int k = start; k < start + size; ++k) sum += gscores[i][order[k]];
        blocks.push_back({sum / size, g.owner, pos, i, size});
      }
      desc[i] = std::move(order);
    }
    std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
      if (a.mean != b.mean) return a.mean > b.mean;
      return std::tie(a.owner, a.position) < std::tie(b.owner, b.position);
    });
    std::map<std::size_t, bool> stopped;
    std::map<std::size_t, int> next_pos;
    for (const Block& b : blocks) {
      if (stopped[b.group] || b.position != next_pos[b.group]) {
        stopped[b.group] = true;
        continue;
      }
      if (b.size > budget) {
        stopped[b.group] = true;
        continue;
      }
      budget -= b.size;
      kept_n[b.group] += b.size;
      ++next_pos[b.group];
    }
    for (std::size_t i : members) {
      const auto& order = desc[i];
      std::vector<int> kept(order.begin(), order.begin() + kept_n[i]);
      std::sort(kept.begin(), kept.end());
      plan.kept[i] = std::move(kept);
    }
  }
  return plan;
}

ModelGraph PrunePlan::pruned_graph(const ModelGraph& graph, const DependencyGraph& deps) const {
  std::vector<LayerNode> nodes = graph.nodes();
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    LayerNode& node = nodes[n];
    const int og = deps.output_group.at(n);
    const int ig = deps.input_group.at(n);
    if (ig >= 0) node.in_channels = static_cast<int>(kept.at(ig).size());
    if (og >= 0) {
      const int units = static_cast<int>(kept.at(og).size());
      if (node.kind == LayerKind::kQkvProjection) {
        node.out_channels = 3 * units;
        node.num_heads = heads_kept.at(og);
      } else {
        node.out_channels = units;
      }
    }
    if (node.kind == LayerKind::kInput) node.in_channels = node.out_channels;
    if (graph.node(n).is_depthwise()) node.groups = node.out_channels;
  }
  return graph.with_nodes(std::move(nodes));
}

PruneOutcome apply_pruning(const WeightedNet& baseline, const DependencyGraph& deps,
                           const std::vector<IsomorphicGroup>& groups, const ImportanceTable& scores,
                           const Strategy& strategy) {
  const ModelGraph& graph = baseline.graph;
  baseline.check_shapes();
  const PrunePlan plan = plan_pruning(graph, deps, groups, strategy, &scores);

  PruneOutcome out;
  out.pruned_graph = plan.pruned_graph(graph, deps);
  out.pruned_net.graph = out.pruned_graph;

  for (std::size_t n = 0; n < graph.size(); ++n) {
    const LayerNode& orig = graph.node(n);
    const LayerNode& now = out.pruned_graph.node(n);
    const int og = deps.output_group.at(n);
    const int ig = deps.input_group.at(n);
    std::vector<int> out_units;
    if (og >= 0) {
      out_units = plan.kept[og];
    } else {
      out_units.resize(orig.visible_out_channels());
      std::iota(out_units.begin(), out_units.end(), 0);
    }
    out.kept[orig.id] = out_units;
    out.original_out[orig.id] = orig.visible_out_channels();

    std::array<int, 4> shape{};
    if (!weight_shape(orig, shape)) continue;

    std::vector<int> rows;
    if (orig.kind == LayerKind::kQkvProjection) {
      const int d = orig.out_channels / 3;
      for (int part = 0; part < 3; ++part) {
        for (int u : out_units) rows.push_back(part * d + u);
      }
    } else {
      rows = out_units;
    }
    std::vector<int> cols;
    const bool sliced_in = (orig.kind == LayerKind::kConv2d && orig.groups == 1) || is_dense_kind(orig.kind);
    if (sliced_in && ig >= 0) {
      cols = plan.kept[ig];
    } else {
      cols.resize(shape[1]);
      std::iota(cols.begin(), cols.end(), 0);
    }

    const Tensor& w = baseline.weights.at(orig.id);
    const Tensor& b = baseline.biases.at(orig.id);
    std::array<int, 4> new_shape{};
    weight_shape(now, new_shape);
    Tensor nw = Tensor::zeros(new_shape[0], new_shape[1], new_shape[2], new_shape[3]);
    Tensor nb = Tensor::zeros(new_shape[0]);
    if (static_cast<int>(rows.size()) != new_shape[0] || static_cast<int>(cols.size()) != new_shape[1]) {
      throw InfeasibleStrategy("slicing of layer '" + orig.id + "' disagrees with the pruned graph");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      nb.data[r] = b.data[rows[r]];
      for (std::size_t c = 0; c < cols.size(); ++c) {
        for (int y = 0; y < shape[2]; ++y) {
          for (int x = 0; x < shape[3]; ++x) {
            nw.at(static_cast<int>(r), static_cast<int>(c), y, x) = w.at(rows[r], cols[c], y, x);
          }
        }
      }
    }
    out.pruned_net.weights.emplace(orig.id, std::move(nw));
    out.pruned_net.biases.emplace(orig.id, std::move(nb));
  }
  out.pruned_net.check_shapes();
  out.achieved_macs = count_total_macs(out.pruned_graph);
  return out;
}

std::vector<std::string> validate_structure(const PruneOutcome& outcome, const StructureLimits& limits) {
  std::vector<std::string> v;
  const ModelGraph& g = outcome.pruned_graph;
  for (const auto& n : g.nodes()) {
    if (n.kind == LayerKind::kQkvProjection) {
      if (n.num_heads <= 0 || n.out_channels % (3 * n.num_heads) != 0) {
        v.push_back("'" + n.id + "' out_channels " + std::to_string(n.out_channels) +
                    " is not divisible by 3 x heads (" + std::to_string(n.num_heads) + ")");
      } else if (n.head_dim() < limits.min_head_dim) {
        v.push_back("'" + n.id + "' head_dim " + std::to_string(n.head_dim()) + " is below " +
                    std::to_string(limits.min_head_dim));
      }
      if (limits.vit_mode && n.out_channels < limits.min_qkv_out) {
        v.push_back("'" + n.id + "' out_channels " + std::to_string(n.out_channels) + " is below " +
                    std::to_string(limits.min_qkv_out));
      }
    }
    const auto orig = outcome.original_out.find(n.id);
    if (orig != outcome.original_out.end() && orig->second > 0) {
      const double removed = 1.0 - static_cast<double>(n.visible_out_channels()) / orig->second;
      if (removed > limits.max_unit_ratio + 1e-9) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.1f%%", removed * 100.0);
        v.push_back("'" + n.id + "' lost " + buf + " of its channels (minimal capacity exceeded)");
      }
    }
  }
  for (const auto& [from, to] : g.edges()) {
    const LayerNode& p = g.node(from);
    const LayerNode& c = g.node(to);
    if (p.visible_out_channels() != c.in_channels) {
      v.push_back("edge " + from + "->" + to + " channel mismatch");
    }
  }
  return v;
}

nlohmann::ordered_json kept_report(const PruneOutcome& outcome) {
  nlohmann::ordered_json j;
  j["achieved_macs"] = outcome.achieved_macs;
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& n : outcome.pruned_graph.nodes()) {
    if (!is_groupable(n)) continue;
    layers.push_back({{"id", n.id},
                      {"original", outcome.original_out.at(n.id)},
                      {"kept_count", outcome.kept.at(n.id).size()},
                      {"kept", outcome.kept.at(n.id)}});
  }
  return j;
}

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/macprof.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "macprune/pruner.hpp"

namespace macprune {

MacCount count_layer_macs(const LayerNode& layer) {
  const MacCount tokens = static_cast<MacCount>(layer.out_h) * layer.out_w;
  const MacCount in = layer.in_channels;
  const MacCount out = layer.out_channels;
  switch (layer.kind) {
    case LayerKind::kConv2d:
      return tokens * out * in * layer.kernel_h * layer.kernel_w / std::max(1, layer.groups);
    case LayerKind::kQkvProjection:
      return tokens * in * out + 2 * tokens * tokens * (out / 3);
    case LayerKind::kLinear:
    case LayerKind::kAttnOutProjection:
    case LayerKind::kMlpFc1:
    case LayerKind::kMlpFc2:
    case LayerKind::kClassifier:
      return tokens * in * out;
    case LayerKind::kNorm:
    case LayerKind::kPool:
    case LayerKind::kResidualAdd:
    case LayerKind::kInput:
      return 0;
  }
  throw std::invalid_argument("unsupported layer kind for '" + layer.id + "'");
}

MacCount count_total_macs(const ModelGraph& graph) {
  MacCount total = 0;
  for (const auto& n : graph.nodes()) total += count_layer_macs(n);
  return total;
}

MacCount count_parameters(const ModelGraph& graph) {
  MacCount total = 0;
  for (const auto& n : graph.nodes()) {
    const MacCount in = n.in_channels;
    const MacCount out = n.out_channels;
    if (n.kind == LayerKind::kConv2d) {
      total += out * (in / std::max(1, n.groups)) * n.kernel_h * n.kernel_w + out;
    } else if (is_dense_kind(n.kind)) {
      total += out * in + out;
    } else if (n.kind == LayerKind::kNorm) {
      total += 2 * out;
    }
  }
  return total;
}

MacReport count_model_macs(const ModelGraph& graph, const std::vector<IsomorphicGroup>& groups) {
  MacReport report;
  report.per_group[kRemainderBucket] = 0;
  for (const auto& g : groups) report.per_group[g.signature] = 0;
  for (const auto& n : graph.nodes()) {
    const MacCount m = count_layer_macs(n);
    report.layer_order.push_back(n.id);
    report.per_layer[n.id] = m;
    report.total += m;
    const auto gi = find_group(groups, n.id);
    report.per_group[gi ? groups[*gi].signature : std::string(kRemainderBucket)] += m;
  }
  report.baseline_macs = report.total;
  return report;
}

nlohmann::ordered_json to_json(const MacReport& report) {
  nlohmann::ordered_json j;
  j["total"] = report.total;
  j["baseline_macs"] = report.baseline_macs;
  auto& layers = j["per_layer"] = nlohmann::ordered_json::array();
  for (const auto& id : report.layer_order) {
    layers.push_back({{"id", id}, {"macs", report.per_layer.at(id)}});
  }
  auto& groups = j["per_group"] = nlohmann::ordered_json::object();
  for (const auto& [sig, m] : report.per_group) groups[sig] = m;
  j["note"] = "all layers counted, classifier included; norm/pool/residual-add count 0";
  return j;
}

std::string to_table(const MacReport& report, const ModelGraph& graph) {
  std::size_t id_w = 5;
  for (const auto& id : report.layer_order) id_w = std::max(id_w, id.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(id_w)) << "Layer" << "  " << std::setw(20) << "Kind"
      << std::setw(24) << "Shape" << std::right << std::setw(16) << "MACs" << std::setw(9) << "Share"
      << "\n";
  for (const auto& id : report.layer_order) {
    const LayerNode& n = graph.node(id);
    std::ostringstream shape;
    shape << n.in_channels << "->" << n.out_channels;
    if (n.kernel_h > 1 || n.kernel_w > 1) shape << " k" << n.kernel_h << "x" << n.kernel_w;
    if (n.stride > 1) shape << " s" << n.stride;
    shape << " @" << n.out_h << "x" << n.out_w;
    const MacCount m = report.per_layer.at(id);
    const double share = report.total > 0 ? 100.0 * static_cast<double>(m) / static_cast<double>(report.total) : 0.0;
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f%%", share);
    out << std::left << std::setw(static_cast<int>(id_w)) << id << "  " << std::setw(20) << to_string(n.kind)
        << std::setw(24) << shape.str() << std::right << std::setw(16) << m << std::setw(9) << pct << "\n";
  }
  char g[32];
  std::snprintf(g, sizeof(g), "%.4f", static_cast<double>(report.total) / 1e9);
  out << "Total MACs: " << report.total << " (" << g << " G)\n";
  return out.str();
}

MacCount predict_pruned_macs(const ModelGraph& graph, const DependencyGraph& deps,
                             const std::vector<IsomorphicGroup>& groups, const Strategy& strategy,
                             const ImportanceTable* scores) {
  const PrunePlan plan = plan_pruning(graph, deps, groups, strategy, scores);
  return count_total_macs(plan.pruned_graph(graph, deps));
}

ToleranceBand parse_band(const std::string& text) {
  static const std::regex re(R"(^\s*\+?([0-9]*\.?[0-9]+)\s*/\s*-?([0-9]*\.?[0-9]+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw std::invalid_argument("tolerance band must look like +5/-15, got '" + text + "'");
  }
  return ToleranceBand{std::stod(m[1].str()), std::stod(m[2].str())};
}

std::string format_band(const ToleranceBand& band) {
  std::ostringstream out;
  out << '+' << band.overshoot_pct << "/-" << band.undershoot_pct;
  return out.str();
}

std::string_view to_string(MacStatus s) {
  switch (s) {
    case MacStatus::kValid:
      return "valid";
    case MacStatus::kOvershoot:
      return "overshoot";
    case MacStatus::kUndershoot:
      return "undershoot";
  }
  return "unknown";
}

double mac_error_pct(double achieved, double target) {
  if (!(target > 0.0)) throw std::invalid_argument("MAC target must be positive");
  return (achieved - target) / target * 100.0;
}

MacStatus within_tolerance(double achieved, double target, const ToleranceBand& band) {
  const double eps = mac_error_pct(achieved, target);
  if (eps > band.overshoot_pct + kPercentSlack) return MacStatus::kOvershoot;
  if (eps < -band.undershoot_pct - kPercentSlack) return MacStatus::kUndershoot;
  return MacStatus::kValid;
}

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "macprune/isomorphic.hpp"

namespace macprune {

namespace {

// Weight rows belonging to output unit `unit`.
std::vector<int> unit_rows(const LayerNode& node, int unit) {
  if (node.kind == LayerKind::kQkvProjection) {
    const int d = node.out_channels / 3;
    return {unit, d + unit, 2 * d + unit};
  }
  return {unit};
}

template <typename Fn>
ImportanceTable score_by_rows(const WeightedNet& net, Criterion criterion, Fn&& row_score) {
  ImportanceTable table;
  table.criterion = criterion;
  for (const auto& node : net.graph.nodes()) {
    if (!is_groupable(node)) continue;
    const Tensor& w = net.weights.at(node.id);
    const Tensor& b = net.biases.at(node.id);
    const std::size_t row_len = w.size() / static_cast<std::size_t>(w.shape[0]);
    std::vector<double> s(node.visible_out_channels(), 0.0);
    for (int u = 0; u < node.visible_out_channels(); ++u) {
      for (int r : unit_rows(node, u)) s[u] += row_score(node.id, r, row_len, w, b);
    }
    table.scores.emplace(node.id, std::move(s));
  }
  return table;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double ImportanceTable::score(const std::string& layer_id, int channel) const {
  const auto it = scores.find(layer_id);
  if (it == scores.end()) throw std::out_of_range("no importance scores for layer '" + layer_id + "'");
  if (channel < 0 || channel >= static_cast<int>(it->second.size())) {
    throw std::out_of_range("no score for channel " + std::to_string(channel) + " of '" + layer_id + "'");
  }
  return it->second[channel];
}

bool ImportanceTable::covers(const ModelGraph& graph) const {
  std::size_t expected = 0;
  for (const auto& node : graph.nodes()) {
    if (!is_groupable(node)) continue;
    ++expected;
    const auto it = scores.find(node.id);
    if (it == scores.end() || it->second.size() != static_cast<std::size_t>(node.visible_out_channels())) {
      return false;
    }
  }
  return expected == scores.size();
}

nlohmann::ordered_json to_json(const ImportanceTable& table) {
  nlohmann::ordered_json j;
  j["criterion"] = std::string(to_string(table.criterion));
  if (table.seed) j["seed"] = *table.seed;
  auto& s = j["scores"] = nlohmann::ordered_json::object();
  for (const auto& [id, v] : table.scores) s[id] = v;
  return j;
}

ImportanceTable importance_from_json(const nlohmann::json& doc) {
  ImportanceTable t;
  try {
    const auto crit = parse_criterion(doc.at("criterion").get<std::string>());
    if (!crit) throw std::invalid_argument("unknown criterion in scores file");
    t.criterion = *crit;
    if (doc.contains("seed")) t.seed = doc["seed"].get<std::uint64_t>();
    for (const auto& [id, v] : doc.at("scores").items()) t.scores[id] = v.get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed scores document: ") + e.what());
  }
  return t;
}

ImportanceTable taylor_scores(const WeightedNet& net, const std::vector<Batch>& calibration) {
  if (calibration.empty()) throw std::invalid_argument("taylor scoring needs at least one calibration batch");
  ImportanceTable total;
  bool first = true;
  for (const Batch& batch : calibration) {
    const LossAndGrad lg = forward_backward(net, batch);
    auto table = score_by_rows(net, Criterion::kTaylor,
                               [&](const std::string& id, int r, std::size_t row_len, const Tensor& w, const Tensor& b) {
                                 const Tensor& gw = lg.grads.weights.at(id);
                                 const Tensor& gb = lg.grads.biases.at(id);
                                 double acc = std::abs(gb.data[r] * b.data[r]);
                                 const std::size_t base = static_cast<std::size_t>(r) * row_len;
                                 for (std::size_t k = 0; k < row_len; ++k) {
                                   acc += std::abs(gw.data[base + k] * w.data[base + k]);
                                 }
                                 return acc;
                               });
    if (first) {
      total = std::move(table);
      first = false;
    } else {
      for (auto& [id, v] : total.scores) {
        const auto& add = table.scores.at(id);
        for (std::size_t c = 0; c < v.size(); ++c) v[c] += add[c];
      }
    }
  }
  return total;
}

ImportanceTable magnitude_scores(const WeightedNet& net, NormKind norm) {
  const Criterion crit = norm == NormKind::kL1 ? Criterion::kL1Norm : Criterion::kL2Norm;
  auto table = score_by_rows(net, crit, [&](const std::string&, int r, std::size_t row_len, const Tensor& w,
                                            const Tensor&) {
    double acc = 0.0;
    const std::size_t base = static_cast<std::size_t>(r) * row_len;
    for (std::size_t k = 0; k < row_len; ++k) {
      const double v = w.data[base + k];
      acc += norm == NormKind::kL1 ? std::abs(v) : v * v;
    }
    return acc;
  });
  if (norm == NormKind::kL2) {
    for (auto& [id, v] : table.scores) {
      for (double& x : v) x = std::sqrt(x);
    }
  }
  return table;
}

ImportanceTable random_scores(const ModelGraph& graph, std::uint64_t seed) {
  ImportanceTable table;
  table.criterion = Criterion::kRandom;
  table.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& node : graph.nodes()) {
    if (!is_groupable(node)) continue;
    std::vector<double> s(node.visible_out_channels());
    // 53 random bits mapped into [0, 1)
    for (double& x : s) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    table.scores.emplace(node.id, std::move(s));
  }
  return table;
}

ImportanceTable compute_scores(const WeightedNet& net, Criterion criterion, const std::vector<Batch>& calibration,
                               std::uint64_t seed) {
  switch (criterion) {
    case Criterion::kTaylor:
      return taylor_scores(net, calibration);
    case Criterion::kL1Norm:
      return magnitude_scores(net, NormKind::kL1);
    case Criterion::kL2Norm:
      return magnitude_scores(net, NormKind::kL2);
    case Criterion::kRandom:
      return random_scores(net.graph, seed);
  }
  throw std::invalid_argument("unknown criterion");
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs two equal-length series");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace macprune {

namespace {

constexpr double kBlobAmplitude = 2.0;

// Box-Muller over a 64-bit engine; std::normal_distribution is not portable across libraries.
class Gauss {
 public:
  explicit Gauss(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(2.0 * std::numbers::pi * v);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * v);
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates with the engine directly; std::shuffle is implementation-defined.
void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

nlohmann::ordered_json to_json(const DatasetParams& p) {
  return {{"classes", p.classes},   {"samples", p.samples}, {"channels", p.channels},
          {"height", p.height},     {"width", p.width},     {"noise", p.noise},
          {"val_fraction", p.val_fraction}, {"seed", p.seed}};
}

DatasetParams dataset_params_from_json(const nlohmann::json& doc, DatasetParams p) {
  p.classes = doc.value("classes", p.classes);
  p.samples = doc.value("samples", p.samples);
  p.channels = doc.value("channels", p.channels);
  p.height = doc.value("height", p.height);
  p.width = doc.value("width", p.width);
  p.noise = doc.value("noise", p.noise);
  p.val_fraction = doc.value("val_fraction", p.val_fraction);
  p.seed = doc.value("seed", p.seed);
  return p;
}

Batch gather(const Batch& data, int sample_size, const std::vector<int>& order) {
  Batch out;
  out.n = static_cast<int>(order.size());
  out.inputs.reserve(order.size() * static_cast<std::size_t>(sample_size));
  for (int i : order) {
    const auto first = data.inputs.begin() + static_cast<std::ptrdiff_t>(i) * sample_size;
    out.inputs.insert(out.inputs.end(), first, first + sample_size);
    if (!data.labels.empty()) out.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

SyntheticDataset generate_dataset(const DatasetParams& p) {
  if (p.classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
  if (p.samples < p.classes) throw std::invalid_argument("dataset needs at least one sample per class");
  if (p.channels < 1 || p.height < 1 || p.width < 1) throw std::invalid_argument("dataset dims must be positive");
  if (!(p.noise >= 0.0)) throw std::invalid_argument("noise must be non-negative");
  if (!(p.val_fraction > 0.0 && p.val_fraction < 1.0)) throw std::invalid_argument("val_fraction must be in (0, 1)");

  SyntheticDataset ds;
  ds.params = p;
  const int d = ds.sample_size();
  Gauss g(p.seed);
  // Each class: two Gaussian bumps with per-channel signed amplitudes.
  std::vector<std::vector<double>> protos(static_cast<std::size_t>(p.classes), std::vector<double>(d, 0.0));
  const double sigma = std::max(1.0, std::min(p.height, p.width) / 4.0);
  for (auto& proto : protos) {
    for (int bump = 0; bump < 2; ++bump) {
      const double cy = g.uniform() * p.height;
      const double cx = g.uniform() * p.width;
      for (int ch = 0; ch < p.channels; ++ch) {
        const double amp = kBlobAmplitude * g.next();
        for (int y = 0; y < p.height; ++y) {
          for (int x = 0; x < p.width; ++x) {
            const double r2 = (y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx);
            proto[(static_cast<std::size_t>(ch) * p.height + y) * p.width + x] +=
                amp * std::exp(-r2 / (2.0 * sigma * sigma));
          }
        }
      }
    }
  }

  Batch all;
  all.n = p.samples;
  all.inputs.resize(static_cast<std::size_t>(p.samples) * d);
  for (int i = 0; i < p.samples; ++i) {
    const int c = i % p.classes;
    all.labels.push_back(c);
    for (int k = 0; k < d; ++k) {
      all.inputs[static_cast<std::size_t>(i) * d + k] = protos[c][k] + p.noise * g.next();
    }
  }

  std::vector<int> train_idx;
  std::vector<int> val_idx;
  for (int c = 0; c < p.classes; ++c) {
    std::vector<int> rows;
    for (int i = c; i < p.samples; i += p.classes) rows.push_back(i);
    shuffle(rows, g.engine());
    const int n_val = static_cast<int>(std::lround(p.val_fraction * static_cast<double>(rows.size())));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      (static_cast<int>(k) < n_val ? val_idx : train_idx).push_back(rows[k]);
    }
  }
  shuffle(train_idx, g.engine());
  std::sort(val_idx.begin(), val_idx.end());
  ds.train = gather(all, d, train_idx);
  ds.val = gather(all, d, val_idx);
  return ds;
}

Batch stratified_subset(const Batch& data, int sample_size, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subset fraction must be in (0, 1]");
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < data.n; ++i) by_class[data.labels[static_cast<std::size_t>(i)]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<int> pick;
  for (auto& [label, rows] : by_class) {
    shuffle(rows, rng);
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(rows.size()))));
    pick.insert(pick.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(k, rows.size())));
  }
  std::sort(pick.begin(), pick.end());
  return gather(data, sample_size, pick);
}

std::vector<Batch> split_batches(const Batch& data, int sample_size, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  std::vector<Batch> out;
  for (int start = 0; start < data.n; start += batch_size) {
    std::vector<int> rows(static_cast<std::size_t>(std::min(batch_size, data.n - start)));
    std::iota(rows.begin(), rows.end(), start);
    out.push_back(gather(data, sample_size, rows));
  }
  return out;
}

}  // namespace macprune

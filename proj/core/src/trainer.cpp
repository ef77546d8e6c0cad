// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/trainer.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace macprune {

std::string_view to_string(Optimizer o) { return o == Optimizer::kSgd ? "sgd" : "adamw"; }

TrainConfig TrainConfig::cnn_inline() { return {}; }

TrainConfig TrainConfig::vit_inline() {
  TrainConfig c;
  c.optimizer = Optimizer::kAdamW;
  c.lr = 1e-4;
  c.reduced_lr = 5e-5;
  c.weight_decay = 0.01;
  return c;
}

TrainConfig TrainConfig::pretrain() {
  TrainConfig c;
  c.epochs = 20;
  c.subset_fraction = 1.0;
  c.label_smoothing = 0.0;
  c.heavy_prune_threshold = 1.0;
  return c;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"subset_fraction", c.subset_fraction},
          {"batch_size", c.batch_size},
          {"optimizer", to_string(c.optimizer)},
          {"lr", c.lr},
          {"reduced_lr", c.reduced_lr},
          {"heavy_prune_threshold", c.heavy_prune_threshold},
          {"momentum", c.momentum},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"weight_decay", c.weight_decay},
          {"label_smoothing", c.label_smoothing},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c) {
  c.epochs = doc.value("epochs", c.epochs);
  c.subset_fraction = doc.value("subset_fraction", c.subset_fraction);
  c.batch_size = doc.value("batch_size", c.batch_size);
  if (doc.contains("optimizer")) {
    const auto o = doc["optimizer"].get<std::string>();
    if (o == "sgd") {
      c.optimizer = Optimizer::kSgd;
    } else if (o == "adamw") {
      c.optimizer = Optimizer::kAdamW;
    } else {
      throw std::invalid_argument("unknown optimizer '" + o + "'");
    }
  }
  c.lr = doc.value("lr", c.lr);
  c.reduced_lr = doc.value("reduced_lr", c.reduced_lr);
  c.heavy_prune_threshold = doc.value("heavy_prune_threshold", c.heavy_prune_threshold);
  c.momentum = doc.value("momentum", c.momentum);
  c.beta1 = doc.value("beta1", c.beta1);
  c.beta2 = doc.value("beta2", c.beta2);
  c.weight_decay = doc.value("weight_decay", c.weight_decay);
  c.label_smoothing = doc.value("label_smoothing", c.label_smoothing);
  c.clip_norm = doc.value("clip_norm", c.clip_norm);
  c.seed = doc.value("seed", c.seed);
  if (c.epochs < 0 || c.batch_size < 1) throw std::invalid_argument("epochs and batch_size must be positive");
  return c;
}

double evaluate(const WeightedNet& net, const Batch& data) {
  if (static_cast<int>(data.labels.size()) != data.n) throw ShapeError("evaluation batch needs one label per row");
  if (data.n == 0) return 0.0;
  const auto pred = predict(net, data);
  int hit = 0;
  for (int i = 0; i < data.n; ++i) hit += pred[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(i)];
  return 100.0 * hit / data.n;
}

namespace {

struct ParamRef {
  Tensor* value;
  const Tensor* grad;
  Tensor* m;
  Tensor* v;
};

}  // namespace

TrainResult train(const WeightedNet& net, const Batch& train_data, const Batch& val, const TrainConfig& cfg,
                  double lr) {
  TrainResult res;
  res.net = net;
  res.learning_rate = lr;
  const int d = input_size(net.graph);
  std::map<std::string, Tensor> mw;
  std::map<std::string, Tensor> mb;
  std::map<std::string, Tensor> vw;
  std::map<std::string, Tensor> vb;
  for (const auto& [k, t] : net.weights) {
    mw[k] = Tensor{t.shape, std::vector<double>(t.size(), 0.0)};
    vw[k] = mw[k];
  }
  for (const auto& [k, t] : net.biases) {
    mb[k] = Tensor{t.shape, std::vector<double>(t.size(), 0.0)};
    vb[k] = mb[k];
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(static_cast<std::size_t>(train_data.n));
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(order.size(), start + cfg.batch_size)));
      const Batch b = gather(train_data, d, rows);
      LossAndGrad lg = forward_backward(res.net, b, cfg.label_smoothing);
      res.final_loss = lg.loss;
      if (!std::isfinite(lg.loss)) {
        res.diverged = true;
        res.steps = step;
        return res;
      }
      std::vector<ParamRef> params;
      for (auto& [k, t] : res.net.weights) params.push_back({&t, &lg.grads.weights.at(k), &mw[k], &vw[k]});
      for (auto& [k, t] : res.net.biases) params.push_back({&t, &lg.grads.biases.at(k), &mb[k], &vb[k]});
      double sq = 0.0;
      for (const auto& p : params) {
        for (double g : p.grad->data) sq += g * g;
      }
      const double norm = std::sqrt(sq);
      const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, step);
      const double bc2 = 1.0 - std::pow(cfg.beta2, step);
      for (auto& p : params) {
        auto& w = p.value->data;
        auto& m = p.m->data;
        auto& v = p.v->data;
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double g = p.grad->data[i] * scale;
          if (cfg.optimizer == Optimizer::kSgd) {
            m[i] = cfg.momentum * m[i] + g + cfg.weight_decay * w[i];
            w[i] -= lr * m[i];
          } else {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            w[i] -= lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps) + cfg.weight_decay * w[i]);
          }
        }
      }
    }
  }
  res.steps = step;
  for (const auto& [k, t] : res.net.weights) {
    for (double x : t.data) {
      if (!std::isfinite(x)) {
        res.diverged = true;
        return res;
      }
    }
  }
  res.accuracy = evaluate(res.net, val);
  return res;
}

TrainResult inline_finetune(const WeightedNet& net, const SyntheticDataset& data, const TrainConfig& cfg,
                            std::size_t baseline_params) {
  if (input_size(net.graph) != data.sample_size()) throw ShapeError("net input does not match dataset samples");
  const Batch subset = stratified_subset(data.train, data.sample_size(), cfg.subset_fraction, cfg.seed);
  double reduction = 0.0;
  if (baseline_params > 0) {
    reduction = 1.0 - static_cast<double>(net.parameter_count()) / static_cast<double>(baseline_params);
  }
  const double lr = reduction > cfg.heavy_prune_threshold ? cfg.reduced_lr : cfg.lr;
  return train(net, subset, data.val, cfg, lr);
}

}  // namespace macprune

// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace macprune {

Tensor Tensor::zeros(int a, int b, int c, int d) {
  Tensor t;
  t.shape = {a, b, c, d};
  t.data.assign(static_cast<std::size_t>(a) * b * c * d, 0.0);
  return t;
}

bool weight_shape(const LayerNode& node, std::array<int, 4>& shape) {
  if (node.kind == LayerKind::kConv2d) {
    shape = {node.out_channels, node.in_channels / std::max(1, node.groups), node.kernel_h, node.kernel_w};
    return true;
  }
  if (is_dense_kind(node.kind)) {
    shape = {node.out_channels, node.in_channels, 1, 1};
    return true;
  }
  if (node.kind == LayerKind::kNorm) {
    shape = {node.out_channels, 1, 1, 1};
    return true;
  }
  return false;
}

void WeightedNet::check_shapes() const {
  for (const auto& node : graph.nodes()) {
    std::array<int, 4> shape{};
    if (!weight_shape(node, shape)) continue;
    const auto w = weights.find(node.id);
    const auto b = biases.find(node.id);
    if (w == weights.end() || b == biases.end()) throw ShapeError("layer '" + node.id + "' has no parameters");
    if (w->second.shape != shape ||
        w->second.data.size() != static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3]) {
      throw ShapeError("layer '" + node.id + "' weight shape disagrees with the graph");
    }
    if (b->second.data.size() != static_cast<std::size_t>(node.out_channels)) {
      throw ShapeError("layer '" + node.id + "' bias length disagrees with the graph");
    }
  }
}

std::size_t WeightedNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [id, t] : weights) n += t.size();
  for (const auto& [id, t] : biases) n += t.size();
  return n;
}

WeightedNet init_weights(const ModelGraph& graph, std::uint64_t seed) {
  WeightedNet net{graph, {}, {}};
  std::mt19937_64 rng(seed);
  for (const auto& node : graph.nodes()) {
    std::array<int, 4> shape{};
    if (!weight_shape(node, shape)) continue;
    Tensor w = Tensor::zeros(shape[0], shape[1], shape[2], shape[3]);
    Tensor b = Tensor::zeros(node.out_channels, 1, 1, 1);
    if (node.kind == LayerKind::kNorm) {
      std::fill(w.data.begin(), w.data.end(), 1.0);
    } else {
      const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (double& v : w.data) v = dist(rng);
    }
    net.weights.emplace(node.id, std::move(w));
    net.biases.emplace(node.id, std::move(b));
  }
  return net;
}

int num_classes(const ModelGraph& graph) {
  for (const auto& n : graph.nodes()) {
    if (n.kind == LayerKind::kClassifier) return n.out_channels;
  }
  throw ShapeError("graph has no classifier node");
}

int input_size(const ModelGraph& graph) {
  const auto& in = graph.node(graph.input_index());
  return in.out_channels * in.out_h * in.out_w;
}

namespace {

struct Step {
  std::size_t index = 0;
  const LayerNode* node = nullptr;
  std::vector<std::size_t> inputs;
  int in_c = 0, in_h = 1, in_w = 1;
  const Tensor* w = nullptr;
  const Tensor* b = nullptr;
  bool relu = false;
};

struct Plan {
  std::vector<Step> steps;
  std::vector<std::size_t> size;  // output length per node index
  std::size_t classifier = 0;
  std::size_t input = 0;
  int classes = 0;
  int input_len = 0;
};

Plan make_plan(const WeightedNet& net) {
  net.check_shapes();
  const ModelGraph& g = net.graph;
  Plan plan;
  plan.size.assign(g.size(), 0);
  bool found = false;
  for (std::size_t idx : g.topo_order()) {
    const LayerNode& node = g.node(idx);
    Step s;
    s.index = idx;
    s.node = &node;
    s.inputs = g.inputs_of(idx);
    if (!s.inputs.empty()) {
      const LayerNode& src = g.node(s.inputs.front());
      s.in_c = src.visible_out_channels();
      s.in_h = src.out_h;
      s.in_w = src.out_w;
    }
    if (auto it = net.weights.find(node.id); it != net.weights.end()) s.w = &it->second;
    if (auto it = net.biases.find(node.id); it != net.biases.end()) s.b = &it->second;
    s.relu = node.kind == LayerKind::kConv2d || node.kind == LayerKind::kLinear ||
             node.kind == LayerKind::kMlpFc1;
    plan.size[idx] = static_cast<std::size_t>(node.visible_out_channels()) * node.tokens();
    if (node.kind == LayerKind::kClassifier) {
      if (found) throw ShapeError("graph has more than one classifier");
      if (node.tokens() != 1) throw ShapeError("classifier '" + node.id + "' must produce 1x1 output");
      found = true;
      plan.classifier = idx;
      plan.classes = node.out_channels;
    }
    plan.steps.push_back(std::move(s));
  }
  if (!found) throw ShapeError("graph has no classifier node");
  plan.input = g.input_index();
  plan.input_len = input_size(g);
  return plan;
}

struct Cache {
  std::vector<std::vector<double>> out;
  std::vector<std::vector<double>> qkv_z;
};

void dense_forward(const Tensor& w, const Tensor& b, const std::vector<double>& x, int in_c, int tokens,
                   std::vector<double>& y) {
  const int out_c = w.shape[0];
  y.assign(static_cast<std::size_t>(out_c) * tokens, 0.0);
  for (int o = 0; o < out_c; ++o) {
    double* yo = y.data() + static_cast<std::size_t>(o) * tokens;
    const double bias = b.data[o];
    for (int t = 0; t < tokens; ++t) yo[t] = bias;
    const double* wo = w.data.data() + static_cast<std::size_t>(o) * in_c;
    for (int i = 0; i < in_c; ++i) {
      const double wv = wo[i];
      if (wv == 0.0) continue;
      const double* xi = x.data() + static_cast<std::size_t>(i) * tokens;
      for (int t = 0; t < tokens; ++t) yo[t] += wv * xi[t];
    }
  }
}

void dense_backward(const Tensor& w, const std::vector<double>& x, const std::vector<double>& gy, int in_c,
                    int tokens, Tensor& gw, Tensor& gb, std::vector<double>* gx) {
  const int out_c = w.shape[0];
  for (int o = 0; o < out_c; ++o) {
    const double* go = gy.data() + static_cast<std::size_t>(o) * tokens;
    double sum = 0.0;
    for (int t = 0; t < tokens; ++t) sum += go[t];
    gb.data[o] += sum;
    const double* wo = w.data.data() + static_cast<std::size_t>(o) * in_c;
    double* gwo = gw.data.data() + static_cast<std::size_t>(o) * in_c;
    for (int i = 0; i < in_c; ++i) {
      const double* xi = x.data() + static_cast<std::size_t>(i) * tokens;
      double acc = 0.0;
      for (int t = 0; t < tokens; ++t) acc += go[t] * xi[t];
      gwo[i] += acc;
      if (gx != nullptr) {
        const double wv = wo[i];
        double* gxi = gx->data() + static_cast<std::size_t>(i) * tokens;
        for (int t = 0; t < tokens; ++t) gxi[t] += wv * go[t];
      }
    }
  }
}

// o[h*hd+d, t] = (1/T) sum_s (q_h[:,t] . k_h[:,s]) v[h*hd+d, s]
void mix_forward(const LayerNode& node, const std::vector<double>& z, std::vector<double>& y) {
  const int tokens = node.tokens();
  const int d_model = node.out_channels / 3;
  const int heads = node.num_heads;
  const int hd = d_model / heads;
  const double inv_t = 1.0 / (tokens * std::sqrt(static_cast<double>(hd)));
  y.assign(static_cast<std::size_t>(d_model) * tokens, 0.0);
  std::vector<double> a(static_cast<std::size_t>(tokens) * tokens);
  for (int h = 0; h < heads; ++h) {
    std::fill(a.begin(), a.end(), 0.0);
    for (int e = 0; e < hd; ++e) {
      const double* q = z.data() + static_cast<std::size_t>(h * hd + e) * tokens;
      const double* k = z.data() + static_cast<std::size_t>(d_model + h * hd + e) * tokens;
      for (int t = 0; t < tokens; ++t) {
        for (int s = 0; s < tokens; ++s) a[static_cast<std::size_t>(t) * tokens + s] += q[t] * k[s];
      }
    }
    for (int d = 0; d < hd; ++d) {
      const double* v = z.data() + static_cast<std::size_t>(2 * d_model + h * hd + d) * tokens;
      double* yo = y.data() + static_cast<std::size_t>(h * hd + d) * tokens;
      for (int t = 0; t < tokens; ++t) {
        double acc = 0.0;
        for (int s = 0; s < tokens; ++s) acc += a[static_cast<std::size_t>(t) * tokens + s] * v[s];
        yo[t] = acc * inv_t;
      }
    }
  }
}

void mix_backward(const LayerNode& node, const std::vector<double>& z, const std::vector<double>& gy,
                  std::vector<double>& gz) {
  const int tokens = node.tokens();
  const int d_model = node.out_channels / 3;
  const int heads = node.num_heads;
  const int hd = d_model / heads;
  const double inv_t = 1.0 / (tokens * std::sqrt(static_cast<double>(hd)));
  gz.assign(z.size(), 0.0);
  std::vector<double> a(static_cast<std::size_t>(tokens) * tokens);
  std::vector<double> ga(a.size());
  for (int h = 0; h < heads; ++h) {
    std::fill(a.begin(), a.end(), 0.0);
    std::fill(ga.begin(), ga.end(), 0.0);
    for (int e = 0; e < hd; ++e) {
      const double* q = z.data() + static_cast<std::size_t>(h * hd + e) * tokens;
      const double* k = z.data() + static_cast<std::size_t>(d_model + h * hd + e) * tokens;
      for (int t = 0; t < tokens; ++t) {
        for (int s = 0; s < tokens; ++s) a[static_cast<std::size_t>(t) * tokens + s] += q[t] * k[s];
      }
    }
    for (int d = 0; d < hd; ++d) {
      const std::size_t vrow = static_cast<std::size_t>(2 * d_model + h * hd + d) * tokens;
      const double* v = z.data() + vrow;
      double* gv = gz.data() + vrow;
      const double* go = gy.data() + static_cast<std::size_t>(h * hd + d) * tokens;
      for (int t = 0; t < tokens; ++t) {
        const double g = go[t] * inv_t;
        if (g == 0.0) continue;
        for (int s = 0; s < tokens; ++s) {
          gv[s] += a[static_cast<std::size_t>(t) * tokens + s] * g;
          ga[static_cast<std::size_t>(t) * tokens + s] += g * v[s];
        }
      }
    }
    for (int e = 0; e < hd; ++e) {
      const std::size_t qrow = static_cast<std::size_t>(h * hd + e) * tokens;
      const std::size_t krow = static_cast<std::size_t>(d_model + h * hd + e) * tokens;
      const double* q = z.data() + qrow;
      const double* k = z.data() + krow;
      double* gq = gz.data() + qrow;
      double* gk = gz.data() + krow;
      for (int t = 0; t < tokens; ++t) {
        for (int s = 0; s < tokens; ++s) {
          const double g = ga[static_cast<std::size_t>(t) * tokens + s];
          gq[t] += g * k[s];
          gk[s] += g * q[t];
        }
      }
    }
  }
}

// Output positions [lo, hi) whose tap at kernel offset k lands inside the input.
std::pair<int, int> valid_range(int out_extent, int in_extent, int stride, int pad, int k) {
  int lo = 0;
  while (lo < out_extent && lo * stride - pad + k < 0) ++lo;
  int hi = out_extent;
  while (hi > lo && (hi - 1) * stride - pad + k >= in_extent) --hi;
  return {lo, hi};
}

void conv_forward(const Step& s, const std::vector<double>& x, std::vector<double>& y) {
  const LayerNode& n = *s.node;
  const Tensor& w = *s.w;
  const int groups = std::max(1, n.groups);
  const int cin_g = s.in_c / groups;
  const int cout_g = n.out_channels / groups;
  const int ph = spatial_padding(n.kernel_h, n.stride);
  const int pw = spatial_padding(n.kernel_w, n.stride);
  const int oh = n.out_h, ow = n.out_w, ih = s.in_h, iw = s.in_w;
  y.assign(static_cast<std::size_t>(n.out_channels) * oh * ow, 0.0);
  for (int o = 0; o < n.out_channels; ++o) {
    double* yo = y.data() + static_cast<std::size_t>(o) * oh * ow;
    std::fill(yo, yo + oh * ow, s.b->data[o]);
    const int grp = o / cout_g;
    for (int il = 0; il < cin_g; ++il) {
      const int i = grp * cin_g + il;
      const double* xi = x.data() + static_cast<std::size_t>(i) * ih * iw;
      for (int ky = 0; ky < n.kernel_h; ++ky) {
        for (int kx = 0; kx < n.kernel_w; ++kx) {
          const double wv = w.at(o, il, ky, kx);
          if (wv == 0.0) continue;
          const auto [oy0, oy1] = valid_range(oh, ih, n.stride, ph, ky);
          const auto [ox0, ox1] = valid_range(ow, iw, n.stride, pw, kx);
          for (int oy = oy0; oy < oy1; ++oy) {
            const double* row = xi + static_cast<std::size_t>(oy * n.stride - ph + ky) * iw;
            double* yrow = yo + static_cast<std::size_t>(oy) * ow;
            const int shift = kx - pw;
            if (n.stride == 1) {
              for (int ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * row[ox + shift];
            } else {
              for (int ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * row[ox * n.stride + shift];
            }
          }
        }
      }
    }
  }
}

void conv_backward(const Step& s, const std::vector<double>& x, const std::vector<double>& gy, Tensor& gw,
                   Tensor& gb, std::vector<double>* gx) {
  const LayerNode& n = *s.node;
  const Tensor& w = *s.w;
  const int groups = std::max(1, n.groups);
  const int cin_g = s.in_c / groups;
  const int cout_g = n.out_channels / groups;
  const int ph = spatial_padding(n.kernel_h, n.stride);
  const int pw = spatial_padding(n.kernel_w, n.stride);
  const int oh = n.out_h, ow = n.out_w, ih = s.in_h, iw = s.in_w;
  for (int o = 0; o < n.out_channels; ++o) {
    const double* go = gy.data() + static_cast<std::size_t>(o) * oh * ow;
    double sum = 0.0;
    for (int p = 0; p < oh * ow; ++p) sum += go[p];
    gb.data[o] += sum;
    const int grp = o / cout_g;
    for (int il = 0; il < cin_g; ++il) {
      const int i = grp * cin_g + il;
      const double* xi = x.data() + static_cast<std::size_t>(i) * ih * iw;
      double* gxi = gx != nullptr ? gx->data() + static_cast<std::size_t>(i) * ih * iw : nullptr;
      for (int ky = 0; ky < n.kernel_h; ++ky) {
        for (int kx = 0; kx < n.kernel_w; ++kx) {
          const double wv = w.at(o, il, ky, kx);
          double acc = 0.0;
          const auto [oy0, oy1] = valid_range(oh, ih, n.stride, ph, ky);
          const auto [ox0, ox1] = valid_range(ow, iw, n.stride, pw, kx);
          const int st = n.stride;
          for (int oy = oy0; oy < oy1; ++oy) {
            const std::size_t off = static_cast<std::size_t>(oy * st - ph + ky) * iw;
            const int shift = kx - pw;
            const double* row = xi + off;
            const double* grow = go + static_cast<std::size_t>(oy) * ow;
            for (int ox = ox0; ox < ox1; ++ox) acc += grow[ox] * row[ox * st + shift];
            if (gxi != nullptr) {
              double* gxrow = gxi + off;
              for (int ox = ox0; ox < ox1; ++ox) gxrow[ox * st + shift] += wv * grow[ox];
            }
          }
          gw.at(o, il, ky, kx) += acc;
        }
      }
    }
  }
}

void pool_forward(const Step& s, const std::vector<double>& x, std::vector<double>& y) {
  const LayerNode& n = *s.node;
  const int c = n.out_channels;
  const int it = s.in_h * s.in_w;
  y.assign(static_cast<std::size_t>(c) * n.tokens(), 0.0);
  if (n.out_h == 1 && n.out_w == 1) {
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int p = 0; p < it; ++p) acc += x[static_cast<std::size_t>(ch) * it + p];
      y[ch] = acc / it;
    }
    return;
  }
  const int ph = spatial_padding(n.kernel_h, n.stride);
  const int pw = spatial_padding(n.kernel_w, n.stride);
  const double inv = 1.0 / (n.kernel_h * n.kernel_w);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < n.out_h; ++oy) {
      for (int ox = 0; ox < n.out_w; ++ox) {
        double acc = 0.0;
        for (int ky = 0; ky < n.kernel_h; ++ky) {
          const int iy = oy * n.stride - ph + ky;
          if (iy < 0 || iy >= s.in_h) continue;
          for (int kx = 0; kx < n.kernel_w; ++kx) {
            const int ix = ox * n.stride - pw + kx;
            if (ix < 0 || ix >= s.in_w) continue;
            acc += x[(static_cast<std::size_t>(ch) * s.in_h + iy) * s.in_w + ix];
          }
        }
        y[(static_cast<std::size_t>(ch) * n.out_h + oy) * n.out_w + ox] = acc * inv;
      }
    }
  }
}

void pool_backward(const Step& s, const std::vector<double>& gy, std::vector<double>& gx) {
  const LayerNode& n = *s.node;
  const int c = n.out_channels;
  const int it = s.in_h * s.in_w;
  if (n.out_h == 1 && n.out_w == 1) {
    for (int ch = 0; ch < c; ++ch) {
      const double g = gy[ch] / it;
      for (int p = 0; p < it; ++p) gx[static_cast<std::size_t>(ch) * it + p] += g;
    }
    return;
  }
  const int ph = spatial_padding(n.kernel_h, n.stride);
  const int pw = spatial_padding(n.kernel_w, n.stride);
  const double inv = 1.0 / (n.kernel_h * n.kernel_w);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < n.out_h; ++oy) {
      for (int ox = 0; ox < n.out_w; ++ox) {
        const double g = gy[(static_cast<std::size_t>(ch) * n.out_h + oy) * n.out_w + ox] * inv;
        for (int ky = 0; ky < n.kernel_h; ++ky) {
          const int iy = oy * n.stride - ph + ky;
          if (iy < 0 || iy >= s.in_h) continue;
          for (int kx = 0; kx < n.kernel_w; ++kx) {
            const int ix = ox * n.stride - pw + kx;
            if (ix < 0 || ix >= s.in_w) continue;
            gx[(static_cast<std::size_t>(ch) * s.in_h + iy) * s.in_w + ix] += g;
          }
        }
      }
    }
  }
}

void forward_sample(const Plan& plan, const double* x, Cache& cache) {
  cache.out.resize(plan.size.size());
  cache.qkv_z.resize(plan.size.size());
  for (const Step& s : plan.steps) {
    const LayerNode& n = *s.node;
    auto& y = cache.out[s.index];
    switch (n.kind) {
      case LayerKind::kInput:
        y.assign(x, x + plan.input_len);
        break;
      case LayerKind::kConv2d:
        conv_forward(s, cache.out[s.inputs[0]], y);
        break;
      case LayerKind::kQkvProjection:
        dense_forward(*s.w, *s.b, cache.out[s.inputs[0]], s.in_c, n.tokens(), cache.qkv_z[s.index]);
        mix_forward(n, cache.qkv_z[s.index], y);
        break;
      case LayerKind::kLinear:
      case LayerKind::kAttnOutProjection:
      case LayerKind::kMlpFc1:
      case LayerKind::kMlpFc2:
      case LayerKind::kClassifier:
        dense_forward(*s.w, *s.b, cache.out[s.inputs[0]], s.in_c, n.tokens(), y);
        break;
      case LayerKind::kNorm: {
        const auto& xin = cache.out[s.inputs[0]];
        const int tokens = n.tokens();
        y.resize(xin.size());
        for (int c = 0; c < n.out_channels; ++c) {
          const double gamma = s.w->data[c];
          const double beta = s.b->data[c];
          for (int t = 0; t < tokens; ++t) {
            const std::size_t k = static_cast<std::size_t>(c) * tokens + t;
            y[k] = gamma * xin[k] + beta;
          }
        }
        break;
      }
      case LayerKind::kPool:
        pool_forward(s, cache.out[s.inputs[0]], y);
        break;
      case LayerKind::kResidualAdd: {
        y = cache.out[s.inputs[0]];
        for (std::size_t k = 1; k < s.inputs.size(); ++k) {
          const auto& other = cache.out[s.inputs[k]];
          for (std::size_t j = 0; j < y.size(); ++j) y[j] += other[j];
        }
        break;
      }
    }
    if (s.relu) {
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    }
  }
}

Tensor& grad_slot(std::map<std::string, Tensor>& m, const std::string& id, const Tensor& like) {
  auto it = m.find(id);
  if (it == m.end()) {
    Tensor t;
    t.shape = like.shape;
    t.data.assign(like.data.size(), 0.0);
    it = m.emplace(id, std::move(t)).first;
  }
  return it->second;
}

void backward_sample(const Plan& plan, const Cache& cache, std::vector<double> dlogits, Gradients& grads) {
  std::vector<std::vector<double>> g(plan.size.size());
  g[plan.classifier] = std::move(dlogits);
  auto grad_of = [&](std::size_t idx) -> std::vector<double>& {
    if (g[idx].empty()) g[idx].assign(plan.size[idx], 0.0);
    return g[idx];
  };
  for (auto it = plan.steps.rbegin(); it != plan.steps.rend(); ++it) {
    const Step& s = *it;
    const LayerNode& n = *s.node;
    if (g[s.index].empty()) continue;
    std::vector<double>& gy = g[s.index];
    if (s.relu) {
      const auto& y = cache.out[s.index];
      for (std::size_t k = 0; k < gy.size(); ++k) {
        if (y[k] <= 0.0) gy[k] = 0.0;
      }
    }
    switch (n.kind) {
      case LayerKind::kInput:
        break;
      case LayerKind::kConv2d: {
        const std::size_t src = s.inputs[0];
        conv_backward(s, cache.out[src], gy, grad_slot(grads.weights, n.id, *s.w),
                      grad_slot(grads.biases, n.id, *s.b), src == plan.input ? nullptr : &grad_of(src));
        break;
      }
      case LayerKind::kQkvProjection: {
        std::vector<double> gz;
        mix_backward(n, cache.qkv_z[s.index], gy, gz);
        const std::size_t src = s.inputs[0];
        dense_backward(*s.w, cache.out[src], gz, s.in_c, n.tokens(), grad_slot(grads.weights, n.id, *s.w),
                       grad_slot(grads.biases, n.id, *s.b), &grad_of(src));
        break;
      }
      case LayerKind::kLinear:
      case LayerKind::kAttnOutProjection:
      case LayerKind::kMlpFc1:
      case LayerKind::kMlpFc2:
      case LayerKind::kClassifier: {
        const std::size_t src = s.inputs[0];
        dense_backward(*s.w, cache.out[src], gy, s.in_c, n.tokens(), grad_slot(grads.weights, n.id, *s.w),
                       grad_slot(grads.biases, n.id, *s.b), &grad_of(src));
        break;
      }
      case LayerKind::kNorm: {
        const std::size_t src = s.inputs[0];
        const auto& xin = cache.out[src];
        auto& gx = grad_of(src);
        Tensor& gw = grad_slot(grads.weights, n.id, *s.w);
        Tensor& gb = grad_slot(grads.biases, n.id, *s.b);
        const int tokens = n.tokens();
        for (int c = 0; c < n.out_channels; ++c) {
          const double gamma = s.w->data[c];
          for (int t = 0; t < tokens; ++t) {
            const std::size_t k = static_cast<std::size_t>(c) * tokens + t;
            gw.data[c] += gy[k] * xin[k];
            gb.data[c] += gy[k];
            gx[k] += gamma * gy[k];
          }
        }
        break;
      }
      case LayerKind::kPool:
        pool_backward(s, gy, grad_of(s.inputs[0]));
        break;
      case LayerKind::kResidualAdd:
        for (std::size_t src : s.inputs) {
          auto& gx = grad_of(src);
          for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += gy[j];
        }
        break;
    }
  }
}

void check_batch(const Plan& plan, const Batch& batch, bool need_labels) {
  if (batch.n < 1) throw ShapeError("batch is empty");
  if (batch.inputs.size() != static_cast<std::size_t>(batch.n) * plan.input_len) {
    throw ShapeError("batch inputs have " + std::to_string(batch.inputs.size()) + " values, expected " +
                     std::to_string(static_cast<std::size_t>(batch.n) * plan.input_len));
  }
  if (need_labels) {
    if (batch.labels.size() != static_cast<std::size_t>(batch.n)) throw ShapeError("batch label count mismatch");
    for (int y : batch.labels) {
      if (y < 0 || y >= plan.classes) throw ShapeError("label " + std::to_string(y) + " out of range");
    }
  }
}

// Returns loss for one sample and fills dlogits (unscaled p - q).
double softmax_xent(const std::vector<double>& logits, int label, double smoothing, std::vector<double>* dlogits) {
  const std::size_t k = logits.size();
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = std::log(z) + mx;
  double loss = 0.0;
  if (dlogits != nullptr) dlogits->resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double q = (1.0 - smoothing) * (static_cast<int>(c) == label ? 1.0 : 0.0) + smoothing / k;
    const double logp = logits[c] - log_z;
    loss -= q * logp;
    if (dlogits != nullptr) (*dlogits)[c] = std::exp(logp) - q;
  }
  return loss;
}

}  // namespace

double forward_loss(const WeightedNet& net, const Batch& batch, double label_smoothing) {
  const Plan plan = make_plan(net);
  check_batch(plan, batch, true);
  Cache cache;
  double total = 0.0;
  for (int i = 0; i < batch.n; ++i) {
    forward_sample(plan, batch.inputs.data() + static_cast<std::size_t>(i) * plan.input_len, cache);
    total += softmax_xent(cache.out[plan.classifier], batch.labels[i], label_smoothing, nullptr);
  }
  return total / batch.n;
}

LossAndGrad forward_backward(const WeightedNet& net, const Batch& batch, double label_smoothing) {
  const Plan plan = make_plan(net);
  check_batch(plan, batch, true);
  LossAndGrad result;
  for (const auto& [id, w] : net.weights) grad_slot(result.grads.weights, id, w);
  for (const auto& [id, b] : net.biases) grad_slot(result.grads.biases, id, b);
  Cache cache;
  std::vector<double> dlogits;
  const double inv_n = 1.0 / batch.n;
  for (int i = 0; i < batch.n; ++i) {
    forward_sample(plan, batch.inputs.data() + static_cast<std::size_t>(i) * plan.input_len, cache);
    result.loss += softmax_xent(cache.out[plan.classifier], batch.labels[i], label_smoothing, &dlogits);
    for (double& d : dlogits) d *= inv_n;
    backward_sample(plan, cache, dlogits, result.grads);
  }
  result.loss *= inv_n;
  return result;
}

std::vector<double> forward_logits(const WeightedNet& net, const Batch& batch) {
  const Plan plan = make_plan(net);
  check_batch(plan, batch, false);
  Cache cache;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(batch.n) * plan.classes);
  for (int i = 0; i < batch.n; ++i) {
    forward_sample(plan, batch.inputs.data() + static_cast<std::size_t>(i) * plan.input_len, cache);
    const auto& l = cache.out[plan.classifier];
    out.insert(out.end(), l.begin(), l.end());
  }
  return out;
}

std::vector<int> predict(const WeightedNet& net, const Batch& batch) {
  const auto logits = forward_logits(net, batch);
  const int k = num_classes(net.graph);
  std::vector<int> out(batch.n);
  for (int i = 0; i < batch.n; ++i) {
    const auto* row = logits.data() + static_cast<std::size_t>(i) * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace macprune

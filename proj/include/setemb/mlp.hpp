#pragma once

// Fixed-architecture multilayer perceptrons with hand-rolled reverse-mode
// gradients, the classification loss heads, and named parameter blocks for
// SGD updates, checkpoints and gradient checks.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "setemb/common.hpp"
#include "setemb/linalg.hpp"

namespace setemb {

enum class Act { Tanh, Identity };

struct Layer {
  Mat w;  // out x in
  Vec b;  // out
  Act act = Act::Identity;
};

struct MlpParams {
  std::vector<Layer> layers;

  int in_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
};

/// Xavier-uniform weights, zero biases. Hidden layers get `hidden_act`, the
/// output layer is linear.
inline MlpParams mlp_init(const std::vector<int>& dims, Act hidden_act,
                          std::uint64_t seed) {
  if (dims.size() < 2) throw ArgumentError("mlp_init: need at least 2 dims");
  for (int d : dims)
    if (d <= 0) throw ArgumentError("mlp_init: dims must be positive");
  Rng rng(mix64(seed, 0x4d4c50ULL));  // "MLP"
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    layer.w = Mat(fan_out, fan_in);
    for (double& x : layer.w.a) x = rng.uniform(-bound, bound);
    layer.b.assign(fan_out, 0.0);
    layer.act = (l + 2 < dims.size()) ? hidden_act : Act::Identity;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Single linear layer y = x (used by tests to force identity maps).
inline MlpParams mlp_identity(int dim) {
  MlpParams p;
  Layer l;
  l.w = Mat::identity(dim);
  l.b.assign(dim, 0.0);
  l.act = Act::Identity;
  p.layers.push_back(std::move(l));
  return p;
}

inline MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  for (const auto& l : p.layers) {
    Layer zl;
    zl.w = Mat(l.w.rows, l.w.cols);
    zl.b.assign(l.b.size(), 0.0);
    zl.act = l.act;
    z.layers.push_back(std::move(zl));
  }
  return z;
}

struct MlpCache {
  Vec input;
  std::vector<Vec> pre;   // pre-activation per layer
  std::vector<Vec> post;  // activated output per layer
};

inline Vec mlp_forward(const MlpParams& p, const Vec& x,
                       MlpCache* cache = nullptr) {
  if (static_cast<int>(x.size()) != p.in_dim())
    throw ArgumentError("mlp_forward: input dimension mismatch");
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  Vec cur = x;
  for (const auto& l : p.layers) {
    Vec z(l.w.rows);
    for (int i = 0; i < l.w.rows; ++i)
      z[i] = dot(l.w.row(i), cur.data(), l.w.cols) + l.b[i];
    if (cache) cache->pre.push_back(z);
    if (l.act == Act::Tanh)
      for (double& v : z) v = std::tanh(v);
    if (cache) cache->post.push_back(z);
    cur = std::move(z);
  }
  return cur;
}

/// Accumulates d<dy, y>/d(params) into `grads` and returns d/d(input).
/// `grads` must be shaped like `p` (see zeros_like).
inline Vec mlp_backward(const MlpParams& p, const MlpCache& cache,
                        const Vec& dy, MlpParams& grads) {
  const auto nl = p.layers.size();
  if (cache.pre.size() != nl || cache.post.size() != nl ||
      static_cast<int>(cache.input.size()) != p.in_dim() ||
      grads.layers.size() != nl)
    throw UsageError("mlp_backward: cache does not match parameters");
  if (static_cast<int>(dy.size()) != p.out_dim())
    throw ArgumentError("mlp_backward: upstream dimension mismatch");
  for (std::size_t l = 0; l < nl; ++l) {
    if (static_cast<int>(cache.pre[l].size()) != p.layers[l].w.rows)
      throw UsageError("mlp_backward: cache does not match parameters");
  }
  Vec delta = dy;
  for (std::size_t li = nl; li-- > 0;) {
    const Layer& l = p.layers[li];
    Layer& gl = grads.layers[li];
    if (l.act == Act::Tanh) {
      // d tanh(z) = 1 - tanh(z)^2, tanh(z) is cached in post
      for (int i = 0; i < l.w.rows; ++i) {
        const double t = cache.post[li][i];
        delta[i] *= 1.0 - t * t;
      }
    }
    const Vec& in = li == 0 ? cache.input : cache.post[li - 1];
    for (int i = 0; i < l.w.rows; ++i) {
      axpy(delta[i], in.data(), gl.w.row(i), l.w.cols);
      gl.b[i] += delta[i];
    }
    Vec dnext(l.w.cols, 0.0);
    for (int i = 0; i < l.w.rows; ++i)
      axpy(delta[i], l.w.row(i), dnext.data(), l.w.cols);
    delta = std::move(dnext);
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Loss heads
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

/// Cross entropy of softmax(logits) against a single class, computed with
/// max-subtraction. Returns (loss, d loss / d logits).
inline std::pair<double, Vec> softmax_ce(const Vec& logits, int true_class) {
  const int c = static_cast<int>(logits.size());
  if (c < 2) throw ArgumentError("softmax_ce: need at least 2 classes");
  if (true_class < 0 || true_class >= c)
    throw ArgumentError("softmax_ce: class index out of range");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("softmax_ce: non-finite logit");
    mx = std::max(mx, v);
  }
  double z = 0.0;
  Vec p(c);
  for (int i = 0; i < c; ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  const double loss = std::log(z) - (logits[true_class] - mx);
  for (int i = 0; i < c; ++i) p[i] /= z;
  p[true_class] -= 1.0;
  return {loss, std::move(p)};
}

/// Per-label logistic loss log(1 + exp(s)) - y*s with overflow-safe log1p.
/// Returns (loss, d loss / d score) with d = sigmoid(s) - y.
inline std::pair<double, double> logistic_label(double score, int y) {
  if (!std::isfinite(score))
    throw NumericError("logistic_label: non-finite score");
  const double softplus = score > 0.0 ? score + std::log1p(std::exp(-score))
                                      : std::log1p(std::exp(score));
  return {softplus - y * score, sigmoid(score) - y};
}

// ---------------------------------------------------------------------------
// Named parameter blocks: one flat view per weight matrix / bias vector.
// ---------------------------------------------------------------------------

struct BlockRef {
  std::string name;
  double* data;
  std::size_t size;
  std::vector<int> dims;
};

inline void collect_blocks(MlpParams& p, const std::string& prefix,
                           std::vector<BlockRef>& out) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string base = prefix + ".l" + std::to_string(l);
    out.push_back({base + ".w", layer.w.a.data(), layer.w.size(),
                   {layer.w.rows, layer.w.cols}});
    out.push_back({base + ".b", layer.b.data(), layer.b.size(),
                   {static_cast<int>(layer.b.size())}});
  }
}

inline nlohmann::json blocks_to_json(const std::vector<BlockRef>& blocks) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& blk : blocks) {
    nlohmann::json entry;
    entry["dims"] = blk.dims;
    entry["data"] = std::vector<double>(blk.data, blk.data + blk.size);
    j[blk.name] = std::move(entry);
  }
  return j;
}

inline void blocks_from_json(const nlohmann::json& j,
                             const std::vector<BlockRef>& blocks) {
  for (const auto& blk : blocks) {
    if (!j.contains(blk.name))
      throw ValidationError("checkpoint missing block: " + blk.name);
    const auto& entry = j.at(blk.name);
    if (entry.at("dims").get<std::vector<int>>() != blk.dims)
      throw ValidationError("checkpoint block has wrong shape: " + blk.name);
    const auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != blk.size)
      throw ValidationError("checkpoint block has wrong size: " + blk.name);
    std::copy(data.begin(), data.end(), blk.data);
  }
}

// ---------------------------------------------------------------------------
// Gradient-check helpers
// ---------------------------------------------------------------------------

/// Group-relative error between an analytic gradient block and its
/// finite-difference estimate: max |a-b| / max(1, max|a|, max|b|).
inline double grad_rel_err(const Vec& analytic, const Vec& fd) {
  double scale = 1.0, dev = 0.0;
  for (double v : analytic) scale = std::max(scale, std::abs(v));
  for (double v : fd) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < analytic.size(); ++i)
    dev = std::max(dev, std::abs(analytic[i] - fd[i]));
  return dev / scale;
}

/// Central finite difference of f with respect to *x.
template <typename F>
double central_diff(F&& f, double* x, double h = 1e-5) {
  const double x0 = *x;
  *x = x0 + h;
  const double fp = f();
  *x = x0 - h;
  const double fm = f();
  *x = x0;
  return (fp - fm) / (2.0 * h);
}

}  // namespace setemb

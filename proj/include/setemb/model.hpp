#pragma once

// The embedding model: per-type free embeddings X_k, per-type inner/outer
// set-function networks psi_k / phi_k, a learnable per-eigenvalue filter on
// the adjacency spectrum, and a linear classification head. Training is
// transductive SGD over the representation-consistency objective plus the
// supervised loss on the train split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "setemb/common.hpp"
#include "setemb/graph.hpp"
#include "setemb/linalg.hpp"
#include "setemb/mlp.hpp"
#include "setemb/spectral.hpp"

namespace setemb {

struct TrainConfig {
  std::vector<double> lambda;  // per-type balance weights (divisive)
  double lambda_w = 1e-3;      // L2 weight on classifier rows
  int rank = 1000;             // spectral rank, clamped to N at use
  std::vector<int> d;          // per-type embedding dims
  int d_psi = 64;              // inner network output dim
  int hidden = 64;             // hidden width of psi/phi
  double learning_rate = 0.05;
  int epochs = 200;
  int batch_size = 256;
  std::uint64_t seed = 0;
  LabelMode mode = LabelMode::Multiclass;
  double init_scale = 0.1;     // stddev of embedding init
  std::string optimizer = "sgd";  // "sgd" | "momentum" | "adam"
  double momentum = 0.9;
};

inline TrainConfig default_config(LabelMode mode, int num_types) {
  TrainConfig cfg;
  cfg.mode = mode;
  if (mode == LabelMode::Multiclass) {
    cfg.lambda.assign(num_types, 1e-3);
    cfg.lambda_w = 1e-3;
  } else {
    cfg.lambda.assign(num_types, 200.0);
    cfg.lambda[0] = 0.2;
    cfg.lambda_w = 1e-4;
  }
  return cfg;
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["lambda"] = c.lambda;
  j["lambda_w"] = c.lambda_w;
  j["rank"] = c.rank;
  j["d"] = c.d;
  j["d_psi"] = c.d_psi;
  j["hidden"] = c.hidden;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["init_scale"] = c.init_scale;
  j["optimizer"] = c.optimizer;
  j["momentum"] = c.momentum;
  return j;
}

/// Applies the fields present in `j` on top of `base`; unknown keys are
/// rejected. "lambda" and "d" accept either a scalar (broadcast over types)
/// or a per-type array.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base) {
  static const std::vector<std::string> known = {
      "lambda",     "lambda_w", "rank",   "d",          "d_psi",
      "hidden",     "learning_rate",      "epochs",     "batch_size",
      "seed",       "mode",     "init_scale",           "optimizer",
      "momentum"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key: " + it.key());
  }
  auto vec_or_scalar = [](const nlohmann::json& v) {
    if (v.is_array()) return v.get<std::vector<double>>();
    return std::vector<double>{v.get<double>()};
  };
  if (j.contains("lambda")) base.lambda = vec_or_scalar(j["lambda"]);
  if (j.contains("lambda_w")) base.lambda_w = j["lambda_w"].get<double>();
  if (j.contains("rank")) base.rank = j["rank"].get<int>();
  if (j.contains("d")) {
    base.d.clear();
    if (j["d"].is_array())
      base.d = j["d"].get<std::vector<int>>();
    else
      base.d = {j["d"].get<int>()};
  }
  if (j.contains("d_psi")) base.d_psi = j["d_psi"].get<int>();
  if (j.contains("hidden")) base.hidden = j["hidden"].get<int>();
  if (j.contains("learning_rate"))
    base.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) base.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) base.batch_size = j["batch_size"].get<int>();
  if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("mode"))
    base.mode = label_mode_from_string(j["mode"].get<std::string>());
  if (j.contains("init_scale")) base.init_scale = j["init_scale"].get<double>();
  if (j.contains("optimizer")) base.optimizer = j["optimizer"].get<std::string>();
  if (j.contains("momentum")) base.momentum = j["momentum"].get<double>();
  return base;
}

/// Resolves per-type defaults against a concrete graph and checks the
/// positivity constraints. Batch size is clamped to N.
inline TrainConfig validated_config(TrainConfig cfg, const Graph& g) {
  const int k = g.num_types;
  if (cfg.lambda.empty()) cfg.lambda = default_config(cfg.mode, k).lambda;
  if (cfg.lambda.size() == 1 && k > 1) cfg.lambda.assign(k, cfg.lambda[0]);
  if (static_cast<int>(cfg.lambda.size()) != k)
    throw ConfigError("lambda must have one entry per node type");
  for (double l : cfg.lambda)
    if (!(l > 0.0)) throw ConfigError("lambda entries must be positive");
  if (cfg.d.empty()) cfg.d.assign(k, 64);
  if (cfg.d.size() == 1 && k > 1) cfg.d.assign(k, cfg.d[0]);
  if (static_cast<int>(cfg.d.size()) != k)
    throw ConfigError("d must have one entry per node type");
  for (int dk : cfg.d)
    if (dk <= 0) throw ConfigError("embedding dims must be positive");
  if (cfg.lambda_w < 0.0) throw ConfigError("lambda_w must be non-negative");
  if (cfg.rank < 1) throw ConfigError("rank must be positive");
  if (cfg.d_psi <= 0 || cfg.hidden <= 0)
    throw ConfigError("network dims must be positive");
  if (!(cfg.learning_rate > 0.0))
    throw ConfigError("learning rate must be positive");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0)
    throw ConfigError("epochs and batch size must be positive");
  if (!(cfg.init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  if (cfg.optimizer != "sgd" && cfg.optimizer != "momentum" &&
      cfg.optimizer != "adam")
    throw ConfigError("optimizer must be sgd, momentum or adam");
  cfg.batch_size = std::min(cfg.batch_size, g.n);
  return cfg;
}

struct EmbedModel {
  LabelMode mode = LabelMode::Multiclass;
  int labeled_type = 0;
  std::vector<int> d;          // per-type embedding dims
  int d_psi = 0;
  std::vector<Mat> x;          // per type: |V_k| x d_k, one row per node
  std::vector<MlpParams> psi;  // d_k -> hidden -> d_psi
  std::vector<MlpParams> phi;  // K*d_psi -> hidden -> d_k
  MlpParams rho;               // scalar filter, 1 -> 3 -> 1
  Mat w;                       // classifier, C x d_labeled
  Vec b;
};

inline int find_labeled_type(const Graph& g) {
  int t = -1;
  for (int v = 0; v < g.n; ++v) {
    if (!g.labeled(v)) continue;
    if (t < 0)
      t = g.node_type[v];
    else if (t != g.node_type[v])
      throw ConfigError("labels must live on a single node type");
  }
  if (t < 0) throw ConfigError("graph has no labeled nodes");
  return t;
}

inline EmbedModel init_model(const Graph& g, const TrainConfig& cfg_in) {
  const TrainConfig cfg = validated_config(cfg_in, g);
  if (cfg.mode != g.mode)
    throw ConfigError("config mode does not match graph label mode");
  const int k = g.num_types;
  EmbedModel m;
  m.mode = cfg.mode;
  m.d = cfg.d;
  m.d_psi = cfg.d_psi;
  m.labeled_type = find_labeled_type(g);
  for (int t = 0; t < k; ++t) {
    const int nk = static_cast<int>(g.type_nodes[t].size());
    Mat xk(nk, cfg.d[t]);
    Rng rng(mix64(cfg.seed, 0x10ULL + t));
    for (double& v : xk.a) v = cfg.init_scale * rng.gauss();
    m.x.push_back(std::move(xk));
    m.psi.push_back(mlp_init({cfg.d[t], cfg.hidden, cfg.d_psi}, Act::Tanh,
                             mix64(cfg.seed, 0x100ULL + t)));
    m.phi.push_back(mlp_init({k * cfg.d_psi, cfg.hidden, cfg.d[t]}, Act::Tanh,
                             mix64(cfg.seed, 0x200ULL + t)));
  }
  m.rho = mlp_init({1, 3, 1}, Act::Tanh, mix64(cfg.seed, 0x300ULL));
  m.w = Mat(g.num_classes, cfg.d[m.labeled_type]);
  m.b.assign(g.num_classes, 0.0);
  return m;
}

inline EmbedModel zeros_model_like(const EmbedModel& m) {
  EmbedModel z;
  z.mode = m.mode;
  z.labeled_type = m.labeled_type;
  z.d = m.d;
  z.d_psi = m.d_psi;
  for (const auto& xk : m.x) z.x.emplace_back(xk.rows, xk.cols);
  for (const auto& p : m.psi) z.psi.push_back(zeros_like(p));
  for (const auto& p : m.phi) z.phi.push_back(zeros_like(p));
  z.rho = zeros_like(m.rho);
  z.w = Mat(m.w.rows, m.w.cols);
  z.b.assign(m.b.size(), 0.0);
  return z;
}

inline std::vector<BlockRef> collect_blocks(EmbedModel& m) {
  std::vector<BlockRef> out;
  for (std::size_t k = 0; k < m.x.size(); ++k)
    out.push_back({"x" + std::to_string(k), m.x[k].a.data(), m.x[k].size(),
                   {m.x[k].rows, m.x[k].cols}});
  for (std::size_t k = 0; k < m.psi.size(); ++k)
    collect_blocks(m.psi[k], "psi" + std::to_string(k), out);
  for (std::size_t k = 0; k < m.phi.size(); ++k)
    collect_blocks(m.phi[k], "phi" + std::to_string(k), out);
  collect_blocks(m.rho, "rho", out);
  out.push_back({"w", m.w.a.data(), m.w.size(), {m.w.rows, m.w.cols}});
  out.push_back({"b", m.b.data(), m.b.size(), {static_cast<int>(m.b.size())}});
  return out;
}

inline void check_model(const EmbedModel& m, const Graph& g,
                        const SpectralBasis& basis) {
  if (basis.n != g.n) throw ArgumentError("basis does not match graph size");
  const int k = g.num_types;
  if (static_cast<int>(m.x.size()) != k ||
      static_cast<int>(m.psi.size()) != k ||
      static_cast<int>(m.phi.size()) != k)
    throw ArgumentError("model type count does not match graph");
  for (int t = 0; t < k; ++t) {
    if (m.x[t].rows != static_cast<int>(g.type_nodes[t].size()) ||
        m.x[t].cols != m.d[t])
      throw ArgumentError("embedding matrix shape mismatch");
    if (m.psi[t].in_dim() != m.d[t] || m.psi[t].out_dim() != m.d_psi)
      throw ArgumentError("psi dimension mismatch");
    if (m.phi[t].in_dim() != k * m.d_psi || m.phi[t].out_dim() != m.d[t])
      throw ArgumentError("phi dimension mismatch");
  }
  if (m.rho.in_dim() != 1 || m.rho.out_dim() != 1)
    throw ArgumentError("rho must map scalars to scalars");
}

/// rho applied elementwise to the retained eigenvalues.
inline FilteredSpectrum filter_values(const EmbedModel& m,
                                      const SpectralBasis& basis) {
  FilteredSpectrum f;
  f.rho_of_sigma.resize(basis.rank);
  for (int i = 0; i < basis.rank; ++i)
    f.rho_of_sigma[i] = mlp_forward(m.rho, {basis.sigma[i]})[0];
  return f;
}

/// Representation of node v with an explicit filter: p_v is the filtered
/// proximity column, s_k = sum_u p_v[u] psi_k(x^u) over type-k nodes, and the
/// result is phi_{type(v)}(s_1, ..., s_K).
inline Vec represent_with_filter(const EmbedModel& m,
                                 const SpectralBasis& basis, const Graph& g,
                                 int v, const FilteredSpectrum& filt) {
  check_model(m, g, basis);
  if (v < 0 || v >= g.n) throw ArgumentError("represent: bad node id");
  const int k = g.num_types;
  const Vec p = proximity_column(basis, filt, v);
  Vec s(static_cast<std::size_t>(k) * m.d_psi, 0.0);
  for (int t = 0; t < k; ++t) {
    double* st = s.data() + static_cast<std::size_t>(t) * m.d_psi;
    const auto& nodes = g.type_nodes[t];
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      const double coef = p[nodes[c]];
      if (coef == 0.0) continue;
      Vec xu(m.x[t].row(static_cast<int>(c)),
             m.x[t].row(static_cast<int>(c)) + m.d[t]);
      const Vec pu = mlp_forward(m.psi[t], xu);
      axpy(coef, pu.data(), st, m.d_psi);
    }
  }
  return mlp_forward(m.phi[g.node_type[v]], s);
}

inline Vec represent(const EmbedModel& m, const SpectralBasis& basis,
                     const Graph& g, int v) {
  return represent_with_filter(m, basis, g, v, filter_values(m, basis));
}


// ---------------------------------------------------------------------------
// Objective and gradients
// ---------------------------------------------------------------------------

/// Per-type eigenvector row blocks; computed once per (graph, basis) pair and
/// reused across training steps.
struct ModelContext {
  std::vector<Mat> u_rows;  // per type: n_k x rank
};

inline ModelContext make_context(const Graph& g, const SpectralBasis& basis) {
  ModelContext ctx;
  for (int t = 0; t < g.num_types; ++t) {
    const auto& nodes = g.type_nodes[t];
    Mat uk(static_cast<int>(nodes.size()), basis.rank);
    for (std::size_t c = 0; c < nodes.size(); ++c)
      std::copy(basis.u.row(nodes[c]), basis.u.row(nodes[c]) + basis.rank,
                uk.row(static_cast<int>(c)));
    ctx.u_rows.push_back(std::move(uk));
  }
  return ctx;
}

/// Factored fast path for a set of nodes: M_k = psi_k(X_k) U_k is built once,
/// then each node costs one filtered eigenvector row and K small products.
/// Matches represent_with_filter up to floating-point reassociation.
inline std::vector<Vec> represent_batch(const EmbedModel& m,
                                        const SpectralBasis& basis,
                                        const Graph& g,
                                        const std::vector<int>& nodes,
                                        const ModelContext* ctx_in = nullptr) {
  check_model(m, g, basis);
  const int k = g.num_types;
  const int r = basis.rank;
  const int dps = m.d_psi;
  ModelContext local_ctx;
  const ModelContext* ctx = ctx_in;
  if (!ctx) {
    local_ctx = make_context(g, basis);
    ctx = &local_ctx;
  }
  const FilteredSpectrum filt = filter_values(m, basis);

  std::vector<Mat> big_m(k);
  for (int t = 0; t < k; ++t) {
    const int nk = m.x[t].rows;
    Mat psi_t(dps, nk);
    for (int c = 0; c < nk; ++c) {
      Vec xu(m.x[t].row(c), m.x[t].row(c) + m.d[t]);
      const Vec pu = mlp_forward(m.psi[t], xu);
      for (int i = 0; i < dps; ++i) psi_t(i, c) = pu[i];
    }
    matmul_nn(psi_t, ctx->u_rows[t], big_m[t]);
  }

  std::vector<Vec> out;
  Vec wv(r), s(static_cast<std::size_t>(k) * dps);
  for (int v : nodes) {
    if (v < 0 || v >= g.n) throw ArgumentError("represent_batch: bad node id");
    const double* uvrow = basis.u.row(v);
    for (int i = 0; i < r; ++i) wv[i] = filt.rho_of_sigma[i] * uvrow[i];
    for (int t = 0; t < k; ++t) {
      double* st = s.data() + static_cast<std::size_t>(t) * dps;
      for (int i = 0; i < dps; ++i) st[i] = dot(big_m[t].row(i), wv.data(), r);
    }
    out.push_back(mlp_forward(m.phi[g.node_type[v]], s));
  }
  return out;
}

struct Objective {
  double loss = 0.0;
  double unsup = 0.0;  // representation error term
  double sup = 0.0;    // supervised loss term (without regularizer)
  double reg = 0.0;    // classifier L2 term
  EmbedModel grads;
};

/// Loss and gradients over one node batch. The representation term covers
/// batch nodes of every type; the supervised term covers batch nodes in the
/// train split; the classifier regularizer is scaled by the labeled batch
/// fraction so a full epoch matches the stated objective in expectation.
inline Objective objective(const EmbedModel& m, const SpectralBasis& basis,
                           const Graph& g, const Split& split,
                           const TrainConfig& cfg,
                           const std::vector<int>& batch,
                           const ModelContext* ctx_in = nullptr) {
  if (batch.empty()) throw ArgumentError("objective: empty batch");
  for (int v : batch)
    if (v < 0 || v >= g.n) throw ArgumentError("objective: bad node id");
  check_model(m, g, basis);
  const int k = g.num_types;
  const int r = basis.rank;
  const int dps = m.d_psi;
  if (static_cast<int>(cfg.lambda.size()) != k)
    throw ConfigError("objective: lambda size mismatch");

  ModelContext local_ctx;
  const ModelContext* ctx = ctx_in;
  if (!ctx) {
    local_ctx = make_context(g, basis);
    ctx = &local_ctx;
  }

  Objective out;
  out.grads = zeros_model_like(m);

  // filter forward
  Vec filt(r);
  std::vector<MlpCache> rho_cache(r);
  for (int i = 0; i < r; ++i)
    filt[i] = mlp_forward(m.rho, {basis.sigma[i]}, &rho_cache[i])[0];

  // inner networks over every node; psi_t holds psi values transposed
  // (d_psi x n_k) so M_t = psi_t * U_t is a plain matmul
  std::vector<Mat> psi_t(k);
  std::vector<std::vector<MlpCache>> psi_cache(k);
  std::vector<Mat> big_m(k);
  for (int t = 0; t < k; ++t) {
    const int nk = m.x[t].rows;
    psi_t[t] = Mat(dps, nk);
    psi_cache[t].resize(nk);
#pragma omp parallel for schedule(static) if (nk >= 512)
    for (int c = 0; c < nk; ++c) {
      Vec xu(m.x[t].row(c), m.x[t].row(c) + m.d[t]);
      const Vec pu = mlp_forward(m.psi[t], xu, &psi_cache[t][c]);
      for (int i = 0; i < dps; ++i) psi_t[t](i, c) = pu[i];
    }
    matmul_nn(psi_t[t], ctx->u_rows[t], big_m[t]);
  }

  std::vector<char> in_train(g.n, 0);
  for (int v : split.train_nodes) in_train[v] = 1;
  const double inv_train =
      split.train_nodes.empty()
          ? 0.0
          : 1.0 / static_cast<double>(split.train_nodes.size());

  std::vector<Mat> d_big_m;
  for (int t = 0; t < k; ++t) d_big_m.emplace_back(dps, r);
  Vec d_filt(r, 0.0);
  long long n_train_batch = 0;

  Vec wv(r), s(static_cast<std::size_t>(k) * dps), dwv(r);
  for (int v : batch) {
    const int tv = g.node_type[v];
    const int pos = g.pos_in_type[v];
    const double* uvrow = basis.u.row(v);
    for (int i = 0; i < r; ++i) wv[i] = filt[i] * uvrow[i];
    for (int t = 0; t < k; ++t) {
      double* st = s.data() + static_cast<std::size_t>(t) * dps;
      for (int i = 0; i < dps; ++i) st[i] = dot(big_m[t].row(i), wv.data(), r);
    }
    MlpCache phi_cache;
    const Vec rep = mlp_forward(m.phi[tv], s, &phi_cache);

    const double ck =
        1.0 / (cfg.lambda[tv] * static_cast<double>(g.type_nodes[tv].size()));
    const double* xv = m.x[tv].row(pos);
    Vec err(m.d[tv]);
    double sq = 0.0;
    for (int i = 0; i < m.d[tv]; ++i) {
      err[i] = xv[i] - rep[i];
      sq += err[i] * err[i];
    }
    out.unsup += ck * sq;

    double* gx = out.grads.x[tv].row(pos);
    axpy(2.0 * ck, err.data(), gx, m.d[tv]);
    Vec drep(m.d[tv]);
    for (int i = 0; i < m.d[tv]; ++i) drep[i] = -2.0 * ck * err[i];
    const Vec ds = mlp_backward(m.phi[tv], phi_cache, drep, out.grads.phi[tv]);

    std::fill(dwv.begin(), dwv.end(), 0.0);
    for (int t = 0; t < k; ++t) {
      const double* dst = ds.data() + static_cast<std::size_t>(t) * dps;
      for (int i = 0; i < dps; ++i) {
        if (dst[i] == 0.0) continue;
        axpy(dst[i], wv.data(), d_big_m[t].row(i), r);
        axpy(dst[i], big_m[t].row(i), dwv.data(), r);
      }
    }
    for (int i = 0; i < r; ++i) d_filt[i] += dwv[i] * uvrow[i];

    if (in_train[v]) {
      ++n_train_batch;
      Vec scores(m.w.rows);
      for (int i = 0; i < m.w.rows; ++i)
        scores[i] = dot(m.w.row(i), xv, m.w.cols) + m.b[i];
      double l = 0.0;
      Vec dscores(m.w.rows, 0.0);
      if (m.mode == LabelMode::Multiclass) {
        auto [ce, dz] = softmax_ce(scores, g.cls[v]);
        l = ce;
        dscores = std::move(dz);
      } else {
        std::vector<char> y(m.w.rows, 0);
        for (int lab : g.labelset[v]) y[lab] = 1;
        for (int i = 0; i < m.w.rows; ++i) {
          auto [li, di] = logistic_label(scores[i], y[i]);
          l += li;
          dscores[i] = di;
        }
      }
      out.sup += inv_train * l;
      for (int i = 0; i < m.w.rows; ++i) {
        axpy(inv_train * dscores[i], xv, out.grads.w.row(i), m.w.cols);
        out.grads.b[i] += inv_train * dscores[i];
        axpy(inv_train * dscores[i], m.w.row(i), gx, m.w.cols);
      }
    }
  }

  // classifier L2, scaled by the labeled fraction of this batch
  const double reg_scale = static_cast<double>(n_train_batch) * inv_train;
  if (cfg.lambda_w > 0.0 && reg_scale > 0.0) {
    double wsq = 0.0;
    for (double x : m.w.a) wsq += x * x;
    out.reg = cfg.lambda_w * reg_scale * wsq;
    for (std::size_t i = 0; i < m.w.size(); ++i)
      out.grads.w.a[i] += 2.0 * cfg.lambda_w * reg_scale * m.w.a[i];
  }

  // backprop through M_t = psi_t * U_t into the inner networks and X
  for (int t = 0; t < k; ++t) {
    const int nk = m.x[t].rows;
    Mat d_psi_rows;  // n_k x d_psi
    matmul_nt(ctx->u_rows[t], d_big_m[t], d_psi_rows);
    for (int c = 0; c < nk; ++c) {
      Vec up(d_psi_rows.row(c), d_psi_rows.row(c) + dps);
      const Vec dx =
          mlp_backward(m.psi[t], psi_cache[t][c], up, out.grads.psi[t]);
      axpy(1.0, dx.data(), out.grads.x[t].row(c), m.d[t]);
    }
  }

  // filter backward
  for (int i = 0; i < r; ++i)
    mlp_backward(m.rho, rho_cache[i], {d_filt[i]}, out.grads.rho);

  out.loss = out.unsup + out.sup + out.reg;
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline void sgd_step(EmbedModel& m, EmbedModel& grads, double lr) {
  auto mb = collect_blocks(m);
  auto gb = collect_blocks(grads);
  for (std::size_t i = 0; i < mb.size(); ++i)
    for (std::size_t j = 0; j < mb[i].size; ++j)
      mb[i].data[j] -= lr * gb[i].data[j];
}

/// Per-parameter optimizer state; plain SGD keeps none.
struct OptState {
  std::vector<Vec> velocity;
  std::vector<Vec> second;
  long long t = 0;
};

inline void optimizer_step(EmbedModel& m, EmbedModel& grads,
                           const TrainConfig& cfg, OptState& st) {
  if (cfg.optimizer == "sgd") {
    sgd_step(m, grads, cfg.learning_rate);
    return;
  }
  auto mb = collect_blocks(m);
  auto gb = collect_blocks(grads);
  if (st.velocity.empty()) {
    for (const auto& blk : mb) st.velocity.emplace_back(blk.size, 0.0);
    if (cfg.optimizer == "adam")
      for (const auto& blk : mb) st.second.emplace_back(blk.size, 0.0);
  }
  if (cfg.optimizer == "momentum") {
    for (std::size_t i = 0; i < mb.size(); ++i)
      for (std::size_t j = 0; j < mb[i].size; ++j) {
        st.velocity[i][j] =
            cfg.momentum * st.velocity[i][j] + gb[i].data[j];
        mb[i].data[j] -= cfg.learning_rate * st.velocity[i][j];
      }
    return;
  }
  // adam
  ++st.t;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < mb.size(); ++i)
    for (std::size_t j = 0; j < mb[i].size; ++j) {
      const double gij = gb[i].data[j];
      st.velocity[i][j] = b1 * st.velocity[i][j] + (1.0 - b1) * gij;
      st.second[i][j] = b2 * st.second[i][j] + (1.0 - b2) * gij * gij;
      const double mhat = st.velocity[i][j] / c1;
      const double vhat = st.second[i][j] / c2;
      mb[i].data[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);
    }
}

struct TrainResult {
  EmbedModel model;
  Vec history;  // per-epoch mean batch loss
};

inline TrainResult train(const Graph& g, const Split& split,
                         const TrainConfig& cfg_in,
                         const SpectralBasis& basis) {
  const TrainConfig cfg = validated_config(cfg_in, g);
  if (cfg.mode != g.mode)
    throw ConfigError("config mode does not match graph label mode");
  EmbedModel m = init_model(g, cfg);
  const ModelContext ctx = make_context(g, basis);

  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  OptState opt;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng(mix64(cfg.seed, 0xE70C0000ULL + static_cast<std::uint64_t>(epoch)));
    erng.shuffle(order);
    double epoch_loss = 0.0;
    int nbatches = 0;
    for (int start = 0; start < g.n; start += cfg.batch_size) {
      const int end = std::min(g.n, start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      Objective obj = objective(m, basis, g, split, cfg, batch, &ctx);
      if (!std::isfinite(obj.loss))
        throw TrainingError("non-finite loss at step " + std::to_string(step));
      optimizer_step(m, obj.grads, cfg, opt);
      for (const auto& blk : collect_blocks(m))
        for (std::size_t i = 0; i < blk.size; ++i)
          if (!std::isfinite(blk.data[i]))
            throw TrainingError("non-finite parameter after step " +
                                std::to_string(step));
      epoch_loss += obj.loss;
      ++nbatches;
      ++step;
    }
    result.history.push_back(epoch_loss / nbatches);
  }
  result.model = std::move(m);
  return result;
}

/// Convenience overload that builds the spectral basis internally.
inline TrainResult train(const Graph& g, const Split& split,
                         const TrainConfig& cfg) {
  const int r = std::min(cfg.rank, g.n);
  const SpectralBasis basis = eigh_truncated(adjacency(g), r);
  return train(g, split, cfg, basis);
}

// ---------------------------------------------------------------------------
// Prediction and evaluation
// ---------------------------------------------------------------------------

inline Vec class_scores(const EmbedModel& m, const Graph& g, int v) {
  if (v < 0 || v >= g.n) throw ArgumentError("predict: bad node id");
  if (g.node_type[v] != m.labeled_type)
    throw ArgumentError("predict: node is not of the labeled type");
  const double* xv = m.x[m.labeled_type].row(g.pos_in_type[v]);
  Vec scores(m.w.rows);
  for (int i = 0; i < m.w.rows; ++i)
    scores[i] = dot(m.w.row(i), xv, m.w.cols) + m.b[i];
  return scores;
}

/// Multiclass prediction: argmax score, ties broken toward the lowest index.
inline int predict_class(const EmbedModel& m, const Graph& g, int v) {
  const Vec scores = class_scores(m, g, v);
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

/// Multilabel prediction: labels whose sigmoid score is >= 0.5.
inline std::vector<int> predict_labels(const EmbedModel& m, const Graph& g,
                                       int v) {
  const Vec scores = class_scores(m, g, v);
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] >= 0.0) out.push_back(i);
  return out;
}

using Metrics = std::map<std::string, double>;

/// Accuracy (multiclass) or macro/micro F1 (multilabel) over the test nodes.
inline Metrics evaluate(const EmbedModel& m, const Graph& g,
                        const Split& split) {
  if (split.test_nodes.empty())
    throw ConfigError("evaluate: empty test set");
  Metrics out;
  if (m.mode == LabelMode::Multiclass) {
    long long correct = 0;
    for (int v : split.test_nodes)
      if (predict_class(m, g, v) == g.cls[v]) ++correct;
    out["accuracy"] = static_cast<double>(correct) /
                      static_cast<double>(split.test_nodes.size());
  } else {
    const int l = m.w.rows;
    std::vector<long long> tp(l, 0), fp(l, 0), fn(l, 0);
    for (int v : split.test_nodes) {
      std::vector<char> truth(l, 0);
      for (int y : g.labelset[v]) truth[y] = 1;
      std::vector<char> pred(l, 0);
      for (int y : predict_labels(m, g, v)) pred[y] = 1;
      for (int i = 0; i < l; ++i) {
        if (pred[i] && truth[i]) ++tp[i];
        if (pred[i] && !truth[i]) ++fp[i];
        if (!pred[i] && truth[i]) ++fn[i];
      }
    }
    double macro = 0.0;
    long long tps = 0, fps = 0, fns = 0;
    for (int i = 0; i < l; ++i) {
      const double denom = static_cast<double>(2 * tp[i] + fp[i] + fn[i]);
      macro += denom == 0.0 ? 0.0 : 2.0 * tp[i] / denom;
      tps += tp[i];
      fps += fp[i];
      fns += fn[i];
    }
    const double micro_denom = static_cast<double>(2 * tps + fps + fns);
    out["macro_f1"] = macro / l;
    out["micro_f1"] = micro_denom == 0.0 ? 0.0 : 2.0 * tps / micro_denom;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline nlohmann::json model_to_checkpoint(EmbedModel& m,
                                          const TrainConfig& cfg,
                                          std::uint64_t basis_hash) {
  nlohmann::json j;
  j["format"] = "setemb-checkpoint-1";
  j["mode"] = to_string(m.mode);
  j["labeled_type"] = m.labeled_type;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(basis_hash));
  j["basis_hash"] = std::string(hex);
  j["config"] = config_to_json(cfg);
  j["blocks"] = blocks_to_json(collect_blocks(m));
  return j;
}

inline std::pair<EmbedModel, TrainConfig> model_from_checkpoint(
    const nlohmann::json& j, const Graph& g) {
  if (j.value("format", "") != "setemb-checkpoint-1")
    throw ValidationError("not a model checkpoint");
  TrainConfig cfg = config_from_json(
      j.at("config"),
      default_config(label_mode_from_string(j.at("mode").get<std::string>()),
                     g.num_types));
  EmbedModel m = init_model(g, cfg);
  blocks_from_json(j.at("blocks"), collect_blocks(m));
  return {std::move(m), std::move(cfg)};
}

}  // namespace setemb

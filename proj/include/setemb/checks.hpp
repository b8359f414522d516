#pragma once

// Verification batteries shared by the CLI `checks` subcommand and the
// acceptance suite: set-function invariance, symmetric-polynomial
// identities, spectral correctness, representation-path equivalence, and
// finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "setemb/common.hpp"
#include "setemb/graph.hpp"
#include "setemb/linalg.hpp"
#include "setemb/mlp.hpp"
#include "setemb/model.hpp"
#include "setemb/setfn.hpp"
#include "setemb/spectral.hpp"
#include "setemb/synthetic.hpp"

namespace setemb {

struct CheckResult {
  std::string name;
  double max_dev = 0.0;
  double tol = 0.0;
  bool pass = false;
};

using CheckList = std::vector<CheckResult>;

inline CheckResult make_check(const std::string& name, double dev, double tol) {
  return {name, dev, tol, dev <= tol};
}

inline bool all_pass(const CheckList& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

inline void print_checks(const CheckList& checks, std::FILE* out = stdout) {
  for (const auto& c : checks)
    std::fprintf(out, "[%s] %-42s max_dev=%.3e  tol=%.1e\n",
                 c.pass ? "PASS" : "FAIL", c.name.c_str(), c.max_dev, c.tol);
}

inline nlohmann::json checks_to_json(const std::string& suite,
                                     const CheckList& checks) {
  nlohmann::json j;
  j["suite"] = suite;
  auto arr = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json e;
    e["name"] = c.name;
    e["max_dev"] = c.max_dev;
    e["tol"] = c.tol;
    e["pass"] = c.pass;
    arr.push_back(std::move(e));
  }
  j["checks"] = std::move(arr);
  j["all_pass"] = all_pass(checks);
  return j;
}

// ---------------------------------------------------------------------------
// Naive reference paths (kept independent of the library evaluation order)
// ---------------------------------------------------------------------------

/// Triple-loop proximity column plus explicit per-type sums; the oracle the
/// factored fast path is checked against.
inline Vec reference_represent(const EmbedModel& m, const SpectralBasis& b,
                               const Graph& g, int v, const Vec& filt) {
  Vec p(g.n, 0.0);
  for (int u = 0; u < g.n; ++u)
    for (int i = 0; i < b.rank; ++i)
      p[u] += b.u(u, i) * filt[i] * b.u(v, i);
  const int k = g.num_types;
  Vec s(static_cast<std::size_t>(k) * m.d_psi, 0.0);
  for (int t = 0; t < k; ++t) {
    double* st = s.data() + static_cast<std::size_t>(t) * m.d_psi;
    const auto& nodes = g.type_nodes[t];
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      Vec xu(m.x[t].row(static_cast<int>(c)),
             m.x[t].row(static_cast<int>(c)) + m.d[t]);
      const Vec pu = mlp_forward(m.psi[t], xu);
      for (int i = 0; i < m.d_psi; ++i) st[i] += p[nodes[c]] * pu[i];
    }
  }
  return mlp_forward(m.phi[g.node_type[v]], s);
}

namespace detail {

inline DeepSetModel random_deepset(int groups, int elem_dim, Rng& rng) {
  DeepSetModel m;
  int pooled = 0;
  for (int g = 0; g < groups; ++g) {
    const int mk = 2 + static_cast<int>(rng.below(2));
    m.inner.push_back(
        mlp_init({elem_dim, 6, mk}, Act::Tanh, rng.bits()));
    pooled += mk;
  }
  m.outer = mlp_init({pooled, 6, 1}, Act::Tanh, rng.bits());
  return m;
}

inline GroupedInput random_grouped(const std::vector<int>& sizes, int elem_dim,
                                   Rng& rng) {
  GroupedInput x;
  for (int nk : sizes) {
    std::vector<Vec> g;
    for (int i = 0; i < nk; ++i) {
      Vec e(elem_dim);
      for (double& v : e) v = rng.uniform(-1.0, 1.0);
      g.push_back(std::move(e));
    }
    x.groups.push_back(std::move(g));
  }
  return x;
}

/// Visits every combination of within-group permutations.
inline void for_each_permutation(
    const GroupedInput& x,
    const std::function<void(const GroupedInput&)>& fn) {
  const int k = x.num_groups();
  std::vector<std::vector<int>> perm(k);
  for (int g = 0; g < k; ++g) {
    perm[g].resize(x.groups[g].size());
    std::iota(perm[g].begin(), perm[g].end(), 0);
  }
  GroupedInput y = x;
  std::function<void(int)> walk = [&](int g) {
    if (g == k) {
      for (int gg = 0; gg < k; ++gg)
        for (std::size_t i = 0; i < perm[gg].size(); ++i)
          y.groups[gg][i] = x.groups[gg][perm[gg][i]];
      fn(y);
      return;
    }
    auto& p = perm[g];
    std::sort(p.begin(), p.end());
    do {
      walk(g + 1);
    } while (std::next_permutation(p.begin(), p.end()));
  };
  walk(0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Oracle battery: set-function invariance and the appendix algebra
// ---------------------------------------------------------------------------

inline CheckList oracle_battery(std::uint64_t seed = 0) {
  CheckList out;
  Rng rng(mix64(seed, 0x4f5241434cULL));  // "ORACL"

  {  // invariance of the pooled form under every within-group permutation,
     // and agreement with brute-force symmetrization
    const int size_cap[3] = {3, 3, 2};
    double dev_perm = 0.0, dev_brute = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int k = 1 + trial % 3;
      std::vector<int> sizes(k);
      for (int g = 0; g < k; ++g)
        sizes[g] = 1 + static_cast<int>(rng.below(size_cap[g]));
      const DeepSetModel m = detail::random_deepset(k, 1, rng);
      const GroupedInput x = detail::random_grouped(sizes, 1, rng);
      const double base = deepset_eval(m, x);
      const double scale = std::max(1.0, std::abs(base));
      detail::for_each_permutation(x, [&](const GroupedInput& y) {
        dev_perm =
            std::max(dev_perm, std::abs(deepset_eval(m, y) - base) / scale);
      });
      auto q = [&](const Vec& flat) {
        GroupedInput y;
        std::size_t at = 0;
        for (int g = 0; g < k; ++g) {
          std::vector<Vec> elems;
          for (int i = 0; i < sizes[g]; ++i) elems.push_back({flat[at++]});
          y.groups.push_back(std::move(elems));
        }
        return deepset_eval(m, y);
      };
      dev_brute = std::max(
          dev_brute, std::abs(brute_symmetrize(q, x) - base) / scale);
    }
    out.push_back(make_check("deepset_permutation_invariance", dev_perm, 1e-9));
    out.push_back(make_check("brute_symmetrize_matches_deepset", dev_brute, 1e-9));
  }

  {  // brute symmetrization is a fixed point on an already-invariant q
    double dev = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> sizes = {1 + static_cast<int>(rng.below(3)),
                                1 + static_cast<int>(rng.below(3))};
      auto q = [&](const Vec& flat) {
        // symmetric within each group: power sums of each block
        double a = 0.0, b = 0.0;
        for (int i = 0; i < sizes[0]; ++i) a += flat[i] + 0.5 * flat[i] * flat[i];
        for (int i = 0; i < sizes[1]; ++i) b += flat[sizes[0] + i];
        return a + b + a * b;
      };
      const GroupedInput x = detail::random_grouped(sizes, 1, rng);
      const double base = q(x.flatten());
      dev = std::max(dev, std::abs(brute_symmetrize(q, x) - base) /
                              std::max(1.0, std::abs(base)));
    }
    out.push_back(make_check("brute_symmetrize_fixed_point", dev, 1e-12));
  }

  {  // m^(2,1)(x1,x2) = p1 p2 - p3
    double dev = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Vec v = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
      const Vec p = power_sums(v, 3);
      const double lhs = monomial_sym({2, 1}, v);
      const double rhs = p[0] * p[1] - p[2];
      dev = std::max(dev, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    out.push_back(make_check("monomial_power_sum_identity", dev, 1e-9));
  }

  {  // the worked example: expansion == factorization
    double dev = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto [expanded, factored] =
          appendix_example(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                           rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
      dev = std::max(dev, std::abs(expanded - factored) /
                              std::max(1.0, std::abs(expanded)));
    }
    out.push_back(make_check("worked_example_identity", dev, 1e-9));
  }

  {  // every monomial symmetric polynomial (n <= 3, exponents <= 3) is a
     // polynomial in the power sums: reconstruct by least squares and check
     // the residual on held-out points
    double dev = 0.0;
    for (int n = 1; n <= 3; ++n) {
      std::vector<std::vector<int>> lambdas;
      std::function<void(std::vector<int>&)> gen = [&](std::vector<int>& cur) {
        if (static_cast<int>(cur.size()) == n) {
          int total = 0;
          for (int e : cur) total += e;
          if (total > 0) lambdas.push_back(cur);
          return;
        }
        const int hi = cur.empty() ? 3 : cur.back();
        for (int e = hi; e >= 0; --e) {
          cur.push_back(e);
          gen(cur);
          cur.pop_back();
        }
      };
      std::vector<int> cur;
      gen(cur);
      for (const auto& lambda : lambdas) {
        int degree = 0;
        for (int e : lambda) degree += e;
        // power-sum monomials prod_i p_i^{a_i} with sum i*a_i == degree
        std::vector<std::vector<int>> basis;
        std::function<void(int, int, std::vector<int>&)> build =
            [&](int i, int remaining, std::vector<int>& acc) {
              if (i > n) {
                if (remaining == 0) basis.push_back(acc);
                return;
              }
              for (int a = 0; a * i <= remaining; ++a) {
                acc.push_back(a);
                build(i + 1, remaining - a * i, acc);
                acc.pop_back();
              }
            };
        std::vector<int> acc;
        build(1, degree, acc);
        const int rows = 40 + 10 * static_cast<int>(basis.size());
        Mat a(rows, static_cast<int>(basis.size()));
        Vec b(rows);
        auto fill = [&](Mat& target, Vec& rhs, Rng& r) {
          for (int row = 0; row < target.rows; ++row) {
            Vec v(n);
            for (double& x : v) x = r.uniform(-1.5, 1.5);
            const Vec p = power_sums(v, n);
            for (std::size_t col = 0; col < basis.size(); ++col) {
              double term = 1.0;
              for (int i = 0; i < n; ++i)
                for (int e = 0; e < basis[col][i]; ++e) term *= p[i];
              target(row, static_cast<int>(col)) = term;
            }
            rhs[row] = monomial_sym(lambda, v);
          }
        };
        fill(a, b, rng);
        const Vec coef = solve_lstsq(a, b);
        Mat a2(rows, static_cast<int>(basis.size()));
        Vec b2(rows);
        fill(a2, b2, rng);
        for (int row = 0; row < rows; ++row) {
          double pred = 0.0;
          for (std::size_t col = 0; col < basis.size(); ++col)
            pred += coef[col] * a2(row, static_cast<int>(col));
          dev = std::max(dev, std::abs(pred - b2[row]) /
                                  std::max(1.0, std::abs(b2[row])));
        }
      }
    }
    out.push_back(make_check("power_sum_basis_reconstruction", dev, 1e-8));
  }

  return out;
}

// ---------------------------------------------------------------------------
// Spectral battery
// ---------------------------------------------------------------------------

inline CheckList spectral_battery(std::uint64_t seed = 0) {
  CheckList out;
  Rng rng(mix64(seed, 0x5350454bULL));

  {  // K2: eigenvalues exactly {1, -1}
    Mat a(2, 2);
    a(0, 1) = a(1, 0) = 1.0;
    const SpectralBasis b = eigh_truncated(a, 2);
    const double dev =
        std::max(std::abs(b.sigma[0] - 1.0), std::abs(b.sigma[1] + 1.0));
    out.push_back(make_check("k2_analytic_spectrum", dev, 1e-12));
  }
  {  // identity: all eigenvalues 1
    const SpectralBasis b = eigh_truncated(Mat::identity(3), 3);
    double dev = 0.0;
    for (double s : b.sigma) dev = std::max(dev, std::abs(s - 1.0));
    out.push_back(make_check("identity_spectrum", dev, 1e-14));
  }
  {  // path 0-1-2: {sqrt2, -sqrt2, 0} in magnitude order
    Mat a(3, 3);
    a(0, 1) = a(1, 0) = a(1, 2) = a(2, 1) = 1.0;
    const SpectralBasis b = eigh_truncated(a, 3);
    const double s2 = std::sqrt(2.0);
    const double dev = std::max({std::abs(b.sigma[0] - s2),
                                 std::abs(b.sigma[1] + s2),
                                 std::abs(b.sigma[2])});
    out.push_back(make_check("path3_analytic_spectrum", dev, 1e-10));
  }

  {  // random graphs: reconstruction, orthonormality, eigenpair residuals
    double dev_rec = 0.0, dev_orth = 0.0, dev_res = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(49));
      const Mat a = adjacency(random_graph(n, rng.uniform(0.1, 0.6), rng.bits()));
      const SpectralBasis b = eigh_truncated(a, n);
      Mat rec(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += b.u(i, k) * b.sigma[k] * b.u(j, k);
          rec(i, j) = s;
        }
      dev_rec = std::max(dev_rec, max_abs_diff(rec, a));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += b.u(k, i) * b.u(k, j);
          dev_orth = std::max(dev_orth, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
      for (int i = 0; i < n; ++i) {
        double worst = 0.0;
        for (int row = 0; row < n; ++row) {
          double au = 0.0;
          for (int k = 0; k < n; ++k) au += a(row, k) * b.u(k, i);
          worst = std::max(worst, std::abs(au - b.sigma[i] * b.u(row, i)));
        }
        dev_res = std::max(dev_res, worst / std::max(1.0, std::abs(b.sigma[i])));
      }
    }
    out.push_back(make_check("full_rank_reconstruction", dev_rec, 1e-8));
    out.push_back(make_check("eigenvector_orthonormality", dev_orth, 1e-8));
    out.push_back(make_check("eigenpair_residual", dev_res, 1e-7));
  }

  {  // filter values c0 + c1*s + c2*s^2 reproduce columns of c0 I + c1 A + c2 A^2
    double dev = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 3 + static_cast<int>(rng.below(12));
      const Mat a = adjacency(random_graph(n, 0.4, rng.bits()));
      const SpectralBasis b = eigh_truncated(a, n);
      const double c0 = rng.uniform(-1, 1), c1 = rng.uniform(-1, 1),
                   c2 = rng.uniform(-1, 1);
      Mat a2;
      matmul_nn(a, a, a2);
      FilteredSpectrum f;
      for (double s : b.sigma)
        f.rho_of_sigma.push_back(c0 + c1 * s + c2 * s * s);
      for (int v = 0; v < n; ++v) {
        const Vec p = proximity_column(b, f, v);
        for (int u = 0; u < n; ++u) {
          const double want =
              c0 * (u == v ? 1.0 : 0.0) + c1 * a(u, v) + c2 * a2(u, v);
          dev = std::max(dev, std::abs(p[u] - want));
        }
      }
    }
    out.push_back(make_check("polynomial_filter_bridge", dev, 1e-8));
  }

  {  // truncation error is non-increasing in the retained rank
    const int n = 30;
    const Mat a = adjacency(random_graph(n, 0.3, mix64(seed, 77)));
    double prev = -1.0, dev = 0.0;
    for (int r = 1; r <= n; ++r) {
      const SpectralBasis b = eigh_truncated(a, r);
      Mat rec(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < r; ++k) s += b.u(i, k) * b.sigma[k] * b.u(j, k);
          rec(i, j) = s;
        }
      for (std::size_t i = 0; i < rec.size(); ++i) rec.a[i] -= a.a[i];
      const double err = frobenius(rec);
      if (prev >= 0.0) dev = std::max(dev, err - prev);
      prev = err;
    }
    out.push_back(make_check("truncation_monotonicity", dev, 1e-10));
  }

  {  // bitwise determinism of the eigenvalues
    const Mat a = adjacency(random_graph(25, 0.35, mix64(seed, 99)));
    const SpectralBasis b1 = eigh_truncated(a, 25);
    const SpectralBasis b2 = eigh_truncated(a, 25);
    double dev = 0.0;
    for (int i = 0; i < 25; ++i)
      if (b1.sigma[i] != b2.sigma[i]) dev = 1.0;
    out.push_back(make_check("eigenvalue_determinism", dev, 0.0));
  }

  return out;
}

// ---------------------------------------------------------------------------
// Gradient battery
// ---------------------------------------------------------------------------

namespace detail {

struct TinyInstance {
  Graph g;
  SpectralBasis basis;
  EmbedModel model;
  TrainConfig cfg;
  Split split;
};

/// 6-node two-type instance with a randomized model; used by the gradient
/// and decomposition checks.
inline TinyInstance tiny_instance(std::uint64_t seed, LabelMode mode) {
  TinyInstance t;
  GraphBuilder b(6, mode);
  for (int v = 0; v < 6; ++v) b.set_type(v, v % 2);
  Rng rng(mix64(seed, 0x54494e59ULL));  // "TINY"
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      if (rng.uniform() < 0.6) b.add_edge(i, j);
  if (mode == LabelMode::Multiclass) {
    b.label(0, 0);
    b.label(2, 1);
    b.label(4, 0);
  } else {
    b.label(0, 0);
    b.label(2, 0);
    b.label(2, 1);
    b.label(4, 1);
  }
  t.g = b.build();
  t.cfg = default_config(mode, 2);
  t.cfg.d = {3, 2};
  t.cfg.d_psi = 3;
  t.cfg.hidden = 4;
  t.cfg.rank = 6;
  t.cfg.lambda = {0.7, 1.3};
  t.cfg.lambda_w = 0.02;
  t.cfg.seed = seed;
  t.cfg.init_scale = 0.5;
  t.basis = eigh_truncated(adjacency(t.g), 6);
  t.model = init_model(t.g, t.cfg);
  for (double& w : t.model.w.a) w = 0.4 * rng.gauss();
  for (double& bb : t.model.b) bb = 0.2 * rng.gauss();
  t.split.fraction = 0.5;
  t.split.seed = seed;
  t.split.train_nodes = {0, 2};
  t.split.test_nodes = {4};
  return t;
}

}  // namespace detail

inline CheckList grad_battery(std::uint64_t seed = 0) {
  CheckList out;

  {  // mlp reverse-mode gradients vs central differences
    double dev = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(mix64(seed, 0x6d6c70ULL + trial));
      MlpParams p = mlp_init({4, 7, 5, 3}, Act::Tanh, rng.bits());
      Vec x(4), dy(3);
      for (double& v : x) v = rng.uniform(-1.5, 1.5);
      for (double& v : dy) v = rng.uniform(-1.0, 1.0);
      MlpCache cache;
      const Vec y0 = mlp_forward(p, x, &cache);
      (void)y0;
      MlpParams grads = zeros_like(p);
      const Vec dx = mlp_backward(p, cache, dy, grads);
      auto loss = [&]() {
        const Vec y = mlp_forward(p, x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += dy[i] * y[i];
        return s;
      };
      std::vector<BlockRef> pb, gb;
      collect_blocks(p, "p", pb);
      collect_blocks(grads, "g", gb);
      for (std::size_t blk = 0; blk < pb.size(); ++blk) {
        Vec analytic(gb[blk].data, gb[blk].data + gb[blk].size);
        Vec fd(pb[blk].size);
        for (std::size_t i = 0; i < pb[blk].size; ++i)
          fd[i] = central_diff(loss, pb[blk].data + i);
        dev = std::max(dev, grad_rel_err(analytic, fd));
      }
      Vec fdx(x.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        fdx[i] = central_diff(loss, &x[i]);
      dev = std::max(dev, grad_rel_err(dx, fdx));
    }
    out.push_back(make_check("mlp_finite_difference", dev, 1e-5));
  }

  {  // loss heads vs central differences
    double dev_sm = 0.0, dev_lg = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(mix64(seed, 0x6c6f7373ULL + trial));
      Vec logits(5);
      for (double& v : logits) v = rng.uniform(-3.0, 3.0);
      const int cls = static_cast<int>(rng.below(5));
      const auto [l0, dl] = softmax_ce(logits, cls);
      (void)l0;
      for (int i = 0; i < 5; ++i) {
        const double fd = central_diff(
            [&] { return softmax_ce(logits, cls).first; }, &logits[i]);
        dev_sm = std::max(dev_sm, std::abs(fd - dl[i]) /
                                      std::max(1.0, std::abs(dl[i])));
      }
      double score = rng.uniform(-8.0, 8.0);
      const int y = static_cast<int>(rng.below(2));
      const auto [ll, dscore] = logistic_label(score, y);
      (void)ll;
      const double fd = central_diff(
          [&] { return logistic_label(score, y).first; }, &score);
      dev_lg = std::max(dev_lg,
                        std::abs(fd - dscore) / std::max(1.0, std::abs(dscore)));
    }
    out.push_back(make_check("softmax_ce_finite_difference", dev_sm, 1e-6));
    out.push_back(make_check("logistic_finite_difference", dev_lg, 1e-6));
  }

  {  // proximity column gradient w.r.t. the filter values
    double dev = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Rng rng(mix64(seed, 0x70726f78ULL + trial));
      const int n = 12, r = 8;
      const Mat a = adjacency(random_graph(n, 0.4, rng.bits()));
      const SpectralBasis b = eigh_truncated(a, r);
      FilteredSpectrum f;
      for (int i = 0; i < r; ++i) f.rho_of_sigma.push_back(rng.uniform(-1, 1));
      Vec upstream(n);
      for (double& v : upstream) v = rng.uniform(-1, 1);
      const int v = static_cast<int>(rng.below(n));
      const Vec analytic = proximity_column_grad(b, v, upstream);
      Vec fd(r);
      auto loss = [&] {
        const Vec p = proximity_column(b, f, v);
        double s = 0.0;
        for (int u = 0; u < n; ++u) s += upstream[u] * p[u];
        return s;
      };
      for (int i = 0; i < r; ++i)
        fd[i] = central_diff(loss, &f.rho_of_sigma[i]);
      dev = std::max(dev, grad_rel_err(analytic, fd));
    }
    out.push_back(make_check("proximity_grad_finite_difference", dev, 1e-6));
  }

  {  // full objective vs central differences over every parameter group
    double dev_mc = 0.0, dev_ml = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      for (LabelMode mode : {LabelMode::Multiclass, LabelMode::Multilabel}) {
        if (mode == LabelMode::Multilabel && trial >= 5) continue;
        auto t = detail::tiny_instance(mix64(seed, 1000 + trial), mode);
        std::vector<int> batch(t.g.n);
        std::iota(batch.begin(), batch.end(), 0);
        Objective obj =
            objective(t.model, t.basis, t.g, t.split, t.cfg, batch);
        auto loss = [&] {
          return objective(t.model, t.basis, t.g, t.split, t.cfg, batch).loss;
        };
        auto mb = collect_blocks(t.model);
        auto gb = collect_blocks(obj.grads);
        double dev = 0.0;
        for (std::size_t blk = 0; blk < mb.size(); ++blk) {
          Vec analytic(gb[blk].data, gb[blk].data + gb[blk].size);
          Vec fd(mb[blk].size);
          for (std::size_t i = 0; i < mb[blk].size; ++i)
            fd[i] = central_diff(loss, mb[blk].data + i);
          dev = std::max(dev, grad_rel_err(analytic, fd));
        }
        (mode == LabelMode::Multiclass ? dev_mc : dev_ml) =
            std::max(mode == LabelMode::Multiclass ? dev_mc : dev_ml, dev);
      }
    }
    out.push_back(make_check("objective_fd_multiclass", dev_mc, 1e-4));
    out.push_back(make_check("objective_fd_multilabel", dev_ml, 1e-4));
  }

  return out;
}

// ---------------------------------------------------------------------------
// Representation battery: fast path vs naive definition, permutation
// consistency, the walk-sum bridge, and objective decomposition
// ---------------------------------------------------------------------------

namespace detail {

struct RandomInstance {
  Graph g;
  SpectralBasis basis;
  EmbedModel model;
  TrainConfig cfg;
};

inline RandomInstance random_instance(std::uint64_t seed, int max_n,
                                      int max_types) {
  Rng rng(mix64(seed, 0x494e5354ULL));  // "INST"
  const int k = 1 + static_cast<int>(rng.below(max_types));
  const int n = std::min(
      max_n, k + 2 + static_cast<int>(rng.below(std::max(1, max_n - k - 1))));
  RandomInstance inst;
  GraphBuilder b(n);
  // nodes 0..k-1 pin one node per type so no type is empty
  for (int v = 0; v < n; ++v)
    b.set_type(v, v < k ? v : static_cast<int>(rng.below(k)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.45) b.add_edge(i, j);
  // labels live on type 0 only
  int next_class = 0;
  for (int v = 0; v < n; ++v)
    if (b.type[v] == 0) b.label(v, (next_class++) % 2);
  inst.g = b.build();
  inst.cfg = default_config(LabelMode::Multiclass, inst.g.num_types);
  inst.cfg.d.assign(inst.g.num_types, 0);
  for (int t = 0; t < inst.g.num_types; ++t)
    inst.cfg.d[t] = 2 + static_cast<int>(rng.below(3));
  inst.cfg.d_psi = 2 + static_cast<int>(rng.below(3));
  inst.cfg.hidden = 5;
  inst.cfg.rank = inst.g.n;
  inst.cfg.seed = rng.bits();
  inst.cfg.init_scale = 0.6;
  inst.basis = eigh_truncated(adjacency(inst.g), inst.g.n);
  inst.model = init_model(inst.g, inst.cfg);
  return inst;
}

}  // namespace detail

inline CheckList represent_battery(std::uint64_t seed = 0) {
  CheckList out;

  {  // factored fast path == naive triple-loop definition
    double dev = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      auto inst = detail::random_instance(mix64(seed, trial), 12, 3);
      const FilteredSpectrum filt = filter_values(inst.model, inst.basis);
      std::vector<int> nodes(inst.g.n);
      std::iota(nodes.begin(), nodes.end(), 0);
      const auto fast = represent_batch(inst.model, inst.basis, inst.g, nodes);
      for (int v = 0; v < inst.g.n; ++v) {
        const Vec ref = reference_represent(inst.model, inst.basis, inst.g, v,
                                            filt.rho_of_sigma);
        for (std::size_t i = 0; i < ref.size(); ++i)
          dev = std::max(dev, std::abs(fast[v][i] - ref[i]));
      }
    }
    out.push_back(make_check("fast_path_equals_reference", dev, 1e-10));
  }

  {  // relabeling nodes within one type permutes representations consistently
    double dev = 0.0;
    for (int trial = 0; trial < 15; ++trial) {
      auto inst = detail::random_instance(mix64(seed, 0xBEEF00 + trial), 10, 3);
      Rng rng(mix64(seed, 0xCAFE00 + trial));
      // pick a type with at least two nodes
      int t = -1;
      for (int cand = 0; cand < inst.g.num_types; ++cand)
        if (inst.g.type_nodes[cand].size() >= 2) t = cand;
      if (t < 0) continue;
      const auto& nodes_t = inst.g.type_nodes[t];
      std::vector<int> image(nodes_t);
      rng.shuffle(image);
      std::vector<int> pi(inst.g.n);
      std::iota(pi.begin(), pi.end(), 0);
      for (std::size_t i = 0; i < nodes_t.size(); ++i) pi[nodes_t[i]] = image[i];

      GraphBuilder b2(inst.g.n, inst.g.mode);
      for (int v = 0; v < inst.g.n; ++v) b2.set_type(pi[v], inst.g.node_type[v]);
      for (auto [u, v] : inst.g.edges) b2.add_edge(pi[u], pi[v]);
      for (int v = 0; v < inst.g.n; ++v)
        if (inst.g.labeled(v)) b2.label(pi[v], inst.g.cls[v]);
      const Graph g2 = b2.build();
      const SpectralBasis basis2 = eigh_truncated(adjacency(g2), g2.n);

      EmbedModel m2 = inst.model;
      // move embedding rows to the permuted positions within type t
      for (std::size_t i = 0; i < nodes_t.size(); ++i) {
        const int src_pos = inst.g.pos_in_type[nodes_t[i]];
        const int dst_pos = g2.pos_in_type[pi[nodes_t[i]]];
        std::copy(inst.model.x[t].row(src_pos),
                  inst.model.x[t].row(src_pos) + inst.model.d[t],
                  m2.x[t].row(dst_pos));
      }
      std::vector<int> nodes(inst.g.n);
      std::iota(nodes.begin(), nodes.end(), 0);
      const auto r1 = represent_batch(inst.model, inst.basis, inst.g, nodes);
      const auto r2 = represent_batch(m2, basis2, g2, nodes);
      for (int v = 0; v < inst.g.n; ++v)
        for (std::size_t i = 0; i < r1[v].size(); ++i)
          dev = std::max(dev, std::abs(r1[v][i] - r2[pi[v]][i]));
    }
    out.push_back(make_check("permutation_consistency", dev, 1e-9));
  }

  {  // degree-2 filter == explicit walk-weighted sums (A^0, A^1, A^2)
    double dev = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      auto inst = detail::random_instance(mix64(seed, 0xF00D00 + trial), 10, 2);
      Rng rng(mix64(seed, 0xF11D00 + trial));
      const double c0 = rng.uniform(-0.5, 0.5), c1 = rng.uniform(-0.5, 0.5),
                   c2 = rng.uniform(-0.5, 0.5);
      FilteredSpectrum f;
      for (double s : inst.basis.sigma)
        f.rho_of_sigma.push_back(c0 + c1 * s + c2 * s * s);
      const Mat a = adjacency(inst.g);
      Mat a2;
      matmul_nn(a, a, a2);
      for (int v = 0; v < inst.g.n; ++v) {
        const Vec lib =
            represent_with_filter(inst.model, inst.basis, inst.g, v, f);
        // explicit evaluation: p[u] = c0 [u==v] + c1 A[u][v] + c2 A^2[u][v]
        Vec s(static_cast<std::size_t>(inst.g.num_types) * inst.model.d_psi,
              0.0);
        for (int t = 0; t < inst.g.num_types; ++t) {
          double* st = s.data() + static_cast<std::size_t>(t) * inst.model.d_psi;
          const auto& tn = inst.g.type_nodes[t];
          for (std::size_t c = 0; c < tn.size(); ++c) {
            const int u = tn[c];
            const double coef =
                c0 * (u == v ? 1.0 : 0.0) + c1 * a(u, v) + c2 * a2(u, v);
            Vec xu(inst.model.x[t].row(static_cast<int>(c)),
                   inst.model.x[t].row(static_cast<int>(c)) + inst.model.d[t]);
            const Vec pu = mlp_forward(inst.model.psi[t], xu);
            for (int i = 0; i < inst.model.d_psi; ++i) st[i] += coef * pu[i];
          }
        }
        const Vec walk = mlp_forward(inst.model.phi[inst.g.node_type[v]], s);
        for (std::size_t i = 0; i < walk.size(); ++i)
          dev = std::max(dev, std::abs(lib[i] - walk[i]));
      }
    }
    out.push_back(make_check("walk_sum_bridge", dev, 1e-8));
  }

  {  // full-batch objective == standalone unsupervised + supervised terms
    double dev = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      for (LabelMode mode : {LabelMode::Multiclass, LabelMode::Multilabel}) {
        auto t = detail::tiny_instance(mix64(seed, 0xDEC0 + trial), mode);
        std::vector<int> batch(t.g.n);
        std::iota(batch.begin(), batch.end(), 0);
        const Objective obj =
            objective(t.model, t.basis, t.g, t.split, t.cfg, batch);
        const FilteredSpectrum filt = filter_values(t.model, t.basis);
        double unsup = 0.0;
        for (int v = 0; v < t.g.n; ++v) {
          const int tv = t.g.node_type[v];
          const Vec rep = represent_with_filter(t.model, t.basis, t.g, v, filt);
          const double* xv = t.model.x[tv].row(t.g.pos_in_type[v]);
          double sq = 0.0;
          for (int i = 0; i < t.model.d[tv]; ++i)
            sq += (xv[i] - rep[i]) * (xv[i] - rep[i]);
          unsup += sq / (t.cfg.lambda[tv] * t.g.type_nodes[tv].size());
        }
        double sup = 0.0;
        for (int v : t.split.train_nodes) {
          const Vec scores = class_scores(t.model, t.g, v);
          if (mode == LabelMode::Multiclass) {
            sup += softmax_ce(scores, t.g.cls[v]).first;
          } else {
            std::vector<char> y(scores.size(), 0);
            for (int lab : t.g.labelset[v]) y[lab] = 1;
            for (std::size_t i = 0; i < scores.size(); ++i)
              sup += logistic_label(scores[i], y[i]).first;
          }
        }
        sup /= static_cast<double>(t.split.train_nodes.size());
        double wsq = 0.0;
        for (double w : t.model.w.a) wsq += w * w;
        const double expect = unsup + sup + t.cfg.lambda_w * wsq;
        dev = std::max(dev, std::abs(obj.loss - expect));
      }
    }
    out.push_back(make_check("objective_decomposition", dev, 1e-10));
  }

  return out;
}

}  // namespace setemb

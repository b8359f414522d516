#pragma once

// Set-function machinery: grouped inputs, the pooled sum-decomposition model
// h(sum_n g_1(x_1n), ..., sum_n g_K(x_Kn)), brute-force symmetrization over
// within-group permutations, power-sum and monomial symmetric polynomials,
// a two-group worked example, and SGD fitting of invariant targets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "setemb/common.hpp"
#include "setemb/linalg.hpp"
#include "setemb/mlp.hpp"

namespace setemb {

struct GroupedInput {
  std::vector<std::vector<Vec>> groups;  // groups[k][i] = element vector

  int num_groups() const { return static_cast<int>(groups.size()); }

  int element_dim() const {
    int d = -1;
    for (const auto& g : groups) {
      if (g.empty()) throw ArgumentError("grouped input: empty group");
      for (const auto& e : g) {
        if (d < 0) d = static_cast<int>(e.size());
        if (static_cast<int>(e.size()) != d || d == 0)
          throw ArgumentError("grouped input: inconsistent element dims");
      }
    }
    return d;
  }

  Vec flatten() const {
    Vec out;
    for (const auto& g : groups)
      for (const auto& e : g) out.insert(out.end(), e.begin(), e.end());
    return out;
  }

  static GroupedInput from_scalars(
      const std::vector<std::vector<double>>& vals) {
    GroupedInput x;
    for (const auto& g : vals) {
      std::vector<Vec> elems;
      for (double v : g) elems.push_back({v});
      x.groups.push_back(std::move(elems));
    }
    return x;
  }
};

struct DeepSetModel {
  std::vector<MlpParams> inner;  // g_k: element_dim -> m_k
  MlpParams outer;               // h: sum m_k -> 1
};

inline void check_deepset(const DeepSetModel& m, const GroupedInput& x) {
  if (m.inner.size() != x.groups.size())
    throw ArgumentError("deepset: group count mismatch");
  const int ed = x.element_dim();
  int pooled = 0;
  for (const auto& g : m.inner) {
    if (g.in_dim() != ed) throw ArgumentError("deepset: element dim mismatch");
    pooled += g.out_dim();
  }
  if (m.outer.in_dim() != pooled || m.outer.out_dim() != 1)
    throw ArgumentError("deepset: outer network dims mismatch");
}

/// h applied to the per-group pooled sums; summation is left-to-right within
/// each group in the given element order.
inline double deepset_eval(const DeepSetModel& m, const GroupedInput& x) {
  check_deepset(m, x);
  Vec pooled(m.outer.in_dim(), 0.0);
  int offset = 0;
  for (std::size_t k = 0; k < x.groups.size(); ++k) {
    const int mk = m.inner[k].out_dim();
    for (const auto& e : x.groups[k]) {
      const Vec f = mlp_forward(m.inner[k], e);
      axpy(1.0, f.data(), pooled.data() + offset, mk);
    }
    offset += mk;
  }
  return mlp_forward(m.outer, pooled)[0];
}

enum class SymNorm { Average, Sum };

/// Averages (or sums) q over the full product of within-group permutations.
/// Guarded at prod N_k! <= 1e6.
inline double brute_symmetrize(const std::function<double(const Vec&)>& q,
                               const GroupedInput& x,
                               SymNorm norm = SymNorm::Average) {
  const int k = x.num_groups();
  const int ed = x.element_dim();
  double total_perms = 1.0;
  for (const auto& g : x.groups)
    for (std::size_t i = 2; i <= g.size(); ++i)
      total_perms *= static_cast<double>(i);
  if (total_perms > 1e6)
    throw ResourceError("brute_symmetrize: permutation count exceeds 1e6");

  std::vector<std::vector<int>> perm(k);
  for (int g = 0; g < k; ++g) {
    perm[g].resize(x.groups[g].size());
    std::iota(perm[g].begin(), perm[g].end(), 0);
  }

  Vec flat;
  flat.reserve(static_cast<std::size_t>(ed) * 8);
  double acc = 0.0;
  long long count = 0;
  std::function<void(int)> walk = [&](int g) {
    if (g == k) {
      flat.clear();
      for (int gg = 0; gg < k; ++gg)
        for (int idx : perm[gg]) {
          const Vec& e = x.groups[gg][idx];
          flat.insert(flat.end(), e.begin(), e.end());
        }
      acc += q(flat);
      ++count;
      return;
    }
    auto& p = perm[g];
    std::sort(p.begin(), p.end());
    do {
      walk(g + 1);
    } while (std::next_permutation(p.begin(), p.end()));
  };
  walk(0);
  return norm == SymNorm::Average ? acc / static_cast<double>(count) : acc;
}

/// Power sums p_d = sum_i values[i]^d for d = 1..max_degree.
inline Vec power_sums(const Vec& values, int max_degree) {
  if (max_degree < 1) throw ArgumentError("power_sums: degree must be >= 1");
  Vec out(max_degree, 0.0);
  for (double v : values) {
    double cur = 1.0;
    for (int d = 0; d < max_degree; ++d) {
      cur *= v;
      out[d] += cur;
    }
  }
  return out;
}

/// Monomial symmetric polynomial: sum over the distinct permutations of the
/// exponent vector lambda (non-increasing, non-negative).
inline double monomial_sym(const std::vector<int>& lambda, const Vec& values) {
  const int n = static_cast<int>(lambda.size());
  if (static_cast<int>(values.size()) != n)
    throw ArgumentError("monomial_sym: variable count mismatch");
  for (int i = 0; i < n; ++i) {
    if (lambda[i] < 0)
      throw ArgumentError("monomial_sym: exponents must be non-negative");
    if (i > 0 && lambda[i] > lambda[i - 1])
      throw ArgumentError("monomial_sym: exponents must be non-increasing");
  }
  std::vector<int> alpha = lambda;
  std::sort(alpha.begin(), alpha.end());  // ascending start enumerates all
  double acc = 0.0;
  do {
    double term = 1.0;
    for (int i = 0; i < n; ++i) {
      double p = 1.0;
      for (int e = 0; e < alpha[i]; ++e) p *= values[i];
      term *= p;
    }
    acc += term;
  } while (std::next_permutation(alpha.begin(), alpha.end()));
  return acc;
}

/// The worked two-group example: the eight-monomial expansion and its
/// monomial-symmetric factorization m1^(2,1) m2^(2,1) + m1^(3,2) m2^(4,3).
/// Returns (expanded, factored).
inline std::pair<double, double> appendix_example(double x11, double x12,
                                                  double x21, double x22) {
  auto p2 = [](double v) { return v * v; };
  auto p3 = [](double v) { return v * v * v; };
  auto p4 = [](double v) { return v * v * v * v; };
  const double expanded =
      x11 * p2(x12) * x21 * p2(x22) + p2(x11) * x12 * p2(x21) * x22 +
      x11 * p2(x12) * p2(x21) * x22 + p2(x11) * x12 * x21 * p2(x22) +
      p2(x11) * p3(x12) * p3(x21) * p4(x22) +
      p3(x11) * p2(x12) * p4(x21) * p3(x22) +
      p2(x11) * p3(x12) * p4(x21) * p3(x22) +
      p3(x11) * p2(x12) * p3(x21) * p4(x22);
  const Vec g1 = {x11, x12}, g2 = {x21, x22};
  const double factored = monomial_sym({2, 1}, g1) * monomial_sym({2, 1}, g2) +
                          monomial_sym({3, 2}, g1) * monomial_sym({4, 3}, g2);
  return {expanded, factored};
}

// ---------------------------------------------------------------------------
// Constructive fitting of invariant targets
// ---------------------------------------------------------------------------

struct FitResult {
  DeepSetModel model;
  double test_mse = 0.0;
};

namespace detail {

inline GroupedInput sample_grouped(const std::vector<int>& sizes, Rng& rng) {
  GroupedInput x;
  for (int nk : sizes) {
    std::vector<Vec> g;
    for (int i = 0; i < nk; ++i) g.push_back({rng.uniform(-1.0, 1.0)});
    x.groups.push_back(std::move(g));
  }
  return x;
}

}  // namespace detail

/// Fits the sum-decomposition model to a partially permutation invariant
/// target by SGD, one step per sampled input, and reports held-out MSE.
/// Throws if 100 permutation probes find the target non-invariant.
inline FitResult fit_invariant(
    const std::function<double(const GroupedInput&)>& target,
    const std::vector<int>& sizes, const std::vector<int>& feature_dims,
    int train_n, std::uint64_t seed) {
  const int k = static_cast<int>(sizes.size());
  if (k == 0 || static_cast<int>(feature_dims.size()) != k)
    throw ArgumentError("fit_invariant: sizes/feature_dims mismatch");
  for (int s : sizes)
    if (s <= 0) throw ArgumentError("fit_invariant: group sizes must be > 0");
  if (train_n <= 0) throw ArgumentError("fit_invariant: train_n must be > 0");

  // invariance precondition, checked by sampling
  {
    Rng probe(mix64(seed, 0x50524f4245ULL));  // "PROBE"
    for (int trial = 0; trial < 100; ++trial) {
      GroupedInput x = detail::sample_grouped(sizes, probe);
      const double base = target(x);
      GroupedInput y = x;
      for (auto& g : y.groups) probe.shuffle(g);
      if (std::abs(target(y) - base) > 1e-8 * std::max(1.0, std::abs(base)))
        throw ArgumentError(
            "fit_invariant: target is not partially permutation invariant");
    }
  }

  const int hidden = 32;
  DeepSetModel m;
  int pooled_dim = 0;
  for (int g = 0; g < k; ++g) {
    m.inner.push_back(mlp_init({1, hidden, feature_dims[g]}, Act::Tanh,
                               mix64(seed, 0x40ULL + g)));
    pooled_dim += feature_dims[g];
  }
  m.outer = mlp_init({pooled_dim, hidden, 1}, Act::Tanh, mix64(seed, 0x80ULL));

  DeepSetModel grads;
  for (const auto& g : m.inner) grads.inner.push_back(zeros_like(g));
  grads.outer = zeros_like(m.outer);
  auto zero_grads = [&] {
    for (auto& g : grads.inner)
      for (auto& l : g.layers) {
        std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
      }
    for (auto& l : grads.outer.layers) {
      std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
  };
  auto apply = [](MlpParams& p, const MlpParams& g, double lr) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      for (std::size_t i = 0; i < p.layers[l].w.size(); ++i)
        p.layers[l].w.a[i] -= lr * g.layers[l].w.a[i];
      for (std::size_t i = 0; i < p.layers[l].b.size(); ++i)
        p.layers[l].b[i] -= lr * g.layers[l].b[i];
    }
  };

  Rng rng(mix64(seed, 0x545241494eULL));  // "TRAIN"
  const double lr0 = 0.05;
  std::vector<std::vector<MlpCache>> inner_cache(k);
  MlpCache outer_cache;
  for (int step = 0; step < train_n; ++step) {
    const GroupedInput x = detail::sample_grouped(sizes, rng);
    const double t = target(x);

    Vec pooled(pooled_dim, 0.0);
    int offset = 0;
    for (int g = 0; g < k; ++g) {
      inner_cache[g].assign(x.groups[g].size(), {});
      const int mk = m.inner[g].out_dim();
      for (std::size_t i = 0; i < x.groups[g].size(); ++i) {
        const Vec f = mlp_forward(m.inner[g], x.groups[g][i], &inner_cache[g][i]);
        axpy(1.0, f.data(), pooled.data() + offset, mk);
      }
      offset += mk;
    }
    const double y = mlp_forward(m.outer, pooled, &outer_cache)[0];
    const double err = y - t;

    zero_grads();
    const Vec dpooled =
        mlp_backward(m.outer, outer_cache, {2.0 * err}, grads.outer);
    offset = 0;
    for (int g = 0; g < k; ++g) {
      const int mk = m.inner[g].out_dim();
      const Vec slice(dpooled.begin() + offset, dpooled.begin() + offset + mk);
      for (std::size_t i = 0; i < x.groups[g].size(); ++i)
        mlp_backward(m.inner[g], inner_cache[g][i], slice, grads.inner[g]);
      offset += mk;
    }

    const double lr = lr0 / (1.0 + 3.0 * step / static_cast<double>(train_n));
    for (int g = 0; g < k; ++g) apply(m.inner[g], grads.inner[g], lr);
    apply(m.outer, grads.outer, lr);
  }

  Rng test_rng(mix64(seed, 0x54455354ULL));  // "TEST"
  double mse = 0.0;
  const int test_n = 2000;
  for (int i = 0; i < test_n; ++i) {
    const GroupedInput x = detail::sample_grouped(sizes, test_rng);
    const double diff = deepset_eval(m, x) - target(x);
    mse += diff * diff;
  }
  return {std::move(m), mse / test_n};
}

}  // namespace setemb

#pragma once

// Dense symmetric eigendecomposition (cyclic Jacobi with round-robin
// ordering), rank truncation, and filtered proximity columns
// p_v = U diag(f) U^T e_v for a per-eigenvalue filter f.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "setemb/common.hpp"
#include "setemb/linalg.hpp"

namespace setemb {

struct SpectralBasis {
  int n = 0;
  int rank = 0;
  Vec sigma;  // length rank, sorted by descending |sigma|, ties by value
  Mat u;      // n x rank, column i pairs with sigma[i]
};

struct FilteredSpectrum {
  Vec rho_of_sigma;  // length rank
};

namespace detail {

struct Rotation {
  int p, q;
  double c, s;
};

// One full cycle of the round-robin ordering visits every index pair exactly
// once using disjoint pairs per round, so each round's rotations can be
// applied in two cache-friendly passes (rows, then columns batched by row).
inline void jacobi_eigh(Mat a, Vec& d, Mat& v, int max_sweeps = 30,
                        double tol = 1e-10) {
  const int n = a.rows;
  v = Mat::identity(n);
  d.assign(n, 0.0);
  if (n == 1) {
    d[0] = a(0, 0);
    return;
  }

  const double norm_a = std::max(frobenius(a), 1e-300);

  const int m = (n % 2 == 0) ? n : n + 1;  // pad with a bye if odd
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);

  std::vector<Rotation> rots;
  rots.reserve(m / 2);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off1 = 0.0, off2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        off1 += std::abs(a(i, j));
        off2 += a(i, j) * a(i, j);
      }
    if (std::sqrt(2.0 * off2) <= tol * norm_a) {
      for (int i = 0; i < n; ++i) d[i] = a(i, i);
      return;
    }
    const double tresh = sweep < 3 ? 0.2 * off1 / (n * n) : 0.0;

    for (int round = 0; round < m - 1; ++round) {
      rots.clear();
      for (int i = 0; i < m / 2; ++i) {
        int p = order[i], q = order[m - 1 - i];
        if (p >= n || q >= n) continue;  // bye
        if (p > q) std::swap(p, q);
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 4 && std::abs(app) + g == std::abs(app) &&
            std::abs(aqq) + g == std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::abs(apq) <= tresh) continue;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        rots.push_back({p, q, c, t * c});
      }
      if (rots.empty()) {
        std::rotate(order.begin() + 1, order.end() - 1, order.end());
        continue;
      }
      const int nr = static_cast<int>(rots.size());
      // rows: disjoint pairs, each rotation owns rows p and q
#pragma omp parallel for schedule(static) if (n >= 256)
      for (int k = 0; k < nr; ++k) {
        const auto [p, q, c, s] = rots[k];
        double* ap = a.row(p);
        double* aq = a.row(q);
        for (int j = 0; j < n; ++j) {
          const double x = ap[j], y = aq[j];
          ap[j] = c * x - s * y;
          aq[j] = s * x + c * y;
        }
      }
      // columns, batched by row so access stays contiguous
#pragma omp parallel for schedule(static) if (n >= 256)
      for (int i = 0; i < n; ++i) {
        double* ai = a.row(i);
        double* vi = v.row(i);
        for (const auto& r : rots) {
          double x = ai[r.p], y = ai[r.q];
          ai[r.p] = r.c * x - r.s * y;
          ai[r.q] = r.s * x + r.c * y;
          x = vi[r.p];
          y = vi[r.q];
          vi[r.p] = r.c * x - r.s * y;
          vi[r.q] = r.s * x + r.c * y;
        }
      }
      for (const auto& r : rots) a(r.p, r.q) = a(r.q, r.p) = 0.0;
      std::rotate(order.begin() + 1, order.end() - 1, order.end());
    }
  }

  double off2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) off2 += a(i, j) * a(i, j);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "jacobi eigensolver did not converge in %d sweeps; "
                "relative off-diagonal residual %.3e",
                max_sweeps, std::sqrt(2.0 * off2) / norm_a);
  throw NumericError(buf);
}

}  // namespace detail

/// Eigendecomposition of a symmetric matrix keeping the r eigenvalues of
/// largest magnitude (ties broken toward the algebraically larger value).
/// Each retained eigenvector is sign-fixed so its largest-magnitude entry is
/// non-negative.
inline SpectralBasis eigh_truncated(const Mat& a, int rank) {
  const int n = a.rows;
  if (a.cols != n) throw ArgumentError("eigh_truncated: matrix not square");
  if (rank < 1 || rank > n)
    throw ArgumentError("eigh_truncated: rank out of range");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-12)
        throw ArgumentError("eigh_truncated: matrix not symmetric");

  Vec d;
  Mat v;
  detail::jacobi_eigh(a, d, v);

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
    const double ax = std::abs(d[x]), ay = std::abs(d[y]);
    if (ax != ay) return ax > ay;
    return d[x] > d[y];
  });

  SpectralBasis b;
  b.n = n;
  b.rank = rank;
  b.sigma.resize(rank);
  b.u = Mat(n, rank);
  for (int j = 0; j < rank; ++j) {
    const int src = idx[j];
    b.sigma[j] = d[src];
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      b.u(i, j) = v(i, src);
      if (std::abs(v(i, src)) > best) {
        best = std::abs(v(i, src));
        arg = i;
      }
    }
    if (b.u(arg, j) < 0.0)
      for (int i = 0; i < n; ++i) b.u(i, j) = -b.u(i, j);
  }
  return b;
}

/// Column v of U diag(filt) U^T: p[u] = sum_i U(u,i) * filt[i] * U(v,i).
inline Vec proximity_column(const SpectralBasis& b, const FilteredSpectrum& f,
                            int v) {
  if (static_cast<int>(f.rho_of_sigma.size()) != b.rank)
    throw ArgumentError("proximity_column: filter length != rank");
  if (v < 0 || v >= b.n) throw ArgumentError("proximity_column: bad node id");
  for (double x : f.rho_of_sigma)
    if (!std::isfinite(x))
      throw NumericError("proximity_column: non-finite filter value");
  Vec t(b.rank);
  const double* uv = b.u.row(v);
  for (int i = 0; i < b.rank; ++i) t[i] = f.rho_of_sigma[i] * uv[i];
  Vec p;
  gemv(b.u, t, p);
  return p;
}

/// d<upstream, p_v>/d filt[i] = (sum_u upstream[u] U(u,i)) * U(v,i).
inline Vec proximity_column_grad(const SpectralBasis& b, int v,
                                 const Vec& upstream) {
  if (static_cast<int>(upstream.size()) != b.n)
    throw ArgumentError("proximity_column_grad: upstream length != n");
  if (v < 0 || v >= b.n)
    throw ArgumentError("proximity_column_grad: bad node id");
  Vec acc(b.rank, 0.0);
  for (int u = 0; u < b.n; ++u) {
    if (upstream[u] == 0.0) continue;
    axpy(upstream[u], b.u.row(u), acc.data(), b.rank);
  }
  const double* uv = b.u.row(v);
  for (int i = 0; i < b.rank; ++i) acc[i] *= uv[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Basis cache: binary container keyed by a content hash of the adjacency.
// ---------------------------------------------------------------------------

inline void save_basis(const SpectralBasis& b, std::uint64_t content_hash,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write basis cache: " + path);
  const char magic[8] = {'S', 'E', 'B', 'A', 'S', '0', '0', '1'};
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&content_hash), 8);
  const std::int32_t n = b.n, r = b.rank;
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&r), 4);
  out.write(reinterpret_cast<const char*>(b.sigma.data()),
            static_cast<std::streamsize>(sizeof(double) * b.sigma.size()));
  out.write(reinterpret_cast<const char*>(b.u.a.data()),
            static_cast<std::streamsize>(sizeof(double) * b.u.size()));
  if (!out) throw Error("short write to basis cache: " + path);
}

/// Returns the cached basis only if the file exists and matches the expected
/// content hash and rank; any mismatch or corruption yields nullopt.
inline std::optional<SpectralBasis> load_basis(std::uint64_t content_hash,
                                               int rank,
                                               const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t h = 0;
  std::int32_t n = 0, r = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&h), 8);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&r), 4);
  if (!in || std::string(magic, 8) != "SEBAS001" || h != content_hash ||
      r != rank || n <= 0 || r < 1 || r > n)
    return std::nullopt;
  SpectralBasis b;
  b.n = n;
  b.rank = r;
  b.sigma.resize(r);
  b.u = Mat(n, r);
  in.read(reinterpret_cast<char*>(b.sigma.data()),
          static_cast<std::streamsize>(sizeof(double) * b.sigma.size()));
  in.read(reinterpret_cast<char*>(b.u.a.data()),
          static_cast<std::streamsize>(sizeof(double) * b.u.size()));
  if (!in) return std::nullopt;
  return b;
}

}  // namespace setemb

#pragma once

// In-memory graph construction and the deterministic synthetic graphs used
// by tests and the verification suites.

#include <cstdint>
#include <utility>
#include <vector>

#include "setemb/common.hpp"
#include "setemb/graph.hpp"

namespace setemb {

struct GraphBuilder {
  int n;
  LabelMode mode;
  std::vector<int> type;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> cls;
  std::vector<std::vector<int>> labelset;

  explicit GraphBuilder(int n_, LabelMode mode_ = LabelMode::Multiclass)
      : n(n_), mode(mode_), type(n_, 0), cls(n_, -1), labelset(n_) {
    if (n_ <= 0) throw ArgumentError("graph builder: need at least one node");
  }

  void set_type(int v, int t) { type.at(v) = t; }

  void add_edge(int u, int v) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw ArgumentError("graph builder: edge endpoint out of range");
    if (u == v) return;
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }

  /// Multiclass: sets the class. Multilabel: accumulates into the label set.
  void label(int v, int y) {
    if (mode == LabelMode::Multiclass)
      cls.at(v) = y;
    else
      labelset.at(v).push_back(y);
  }

  Graph build() const {
    Graph g;
    g.n = n;
    g.mode = mode;
    g.node_type = type;
    g.num_types = 1;
    for (int t : type) g.num_types = std::max(g.num_types, t + 1);
    g.edges = edges;
    g.cls = cls;
    g.labelset = labelset;
    for (auto& s : g.labelset) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    detail::refresh_num_classes(g);
    detail::finalize_structure(g);
    return g;
  }
};

/// Stochastic block model with equally sized blocks; every node is labeled
/// with its block index.
inline Graph sbm_graph(int n, int blocks, double p_in, double p_out,
                       std::uint64_t seed,
                       LabelMode mode = LabelMode::Multiclass) {
  GraphBuilder b(n, mode);
  auto block_of = [&](int v) { return v * blocks / n; };
  Rng rng(mix64(seed, 0x53424dULL));  // "SBM"
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p = block_of(i) == block_of(j) ? p_in : p_out;
      if (rng.uniform() < p) b.add_edge(i, j);
    }
  for (int v = 0; v < n; ++v) b.label(v, block_of(v));
  return b.build();
}

/// 20 nodes, two blocks, intra-block edge probability 0.8, inter 0.05.
inline Graph two_community_graph(std::uint64_t seed = 0) {
  return sbm_graph(20, 2, 0.8, 0.05, seed);
}

/// Two-type synthetic: 60 type-1 nodes in 3 labeled communities plus 20
/// type-2 hub nodes wired per community. Communities are internally
/// connected and each hub links densely to the type-1 nodes of its own
/// community.
inline Graph hetero_community_graph(std::uint64_t seed,
                                    LabelMode mode = LabelMode::Multiclass) {
  const int n1 = 60, n2 = 20, communities = 3;
  GraphBuilder b(n1 + n2, mode);
  Rng rng(mix64(seed, 0x484554ULL));  // "HET"
  for (int h = 0; h < n2; ++h) b.set_type(n1 + h, 1);
  auto comm1 = [&](int v) { return v / (n1 / communities); };
  auto comm2 = [&](int h) { return h % communities; };
  for (int v = 0; v < n1; ++v) {
    b.label(v, comm1(v));
    for (int u = v + 1; u < n1; ++u)
      if (rng.uniform() < (comm1(v) == comm1(u) ? 0.25 : 0.02))
        b.add_edge(v, u);
    for (int h = 0; h < n2; ++h)
      if (rng.uniform() < (comm1(v) == comm2(h) ? 0.7 : 0.02))
        b.add_edge(v, n1 + h);
  }
  for (int h = 0; h < n2; ++h)
    for (int j = h + 1; j < n2; ++j)
      if (comm2(h) == comm2(j) && rng.uniform() < 0.3)
        b.add_edge(n1 + h, n1 + j);
  return b.build();
}

/// Erdos-Renyi graph without labels; optionally with nodes spread over
/// `num_types` types (node v < num_types gets type v so no type is empty).
inline Graph random_graph(int n, double p, std::uint64_t seed,
                          int num_types = 1) {
  GraphBuilder b(n);
  Rng rng(mix64(seed, 0x524e44ULL));  // "RND"
  for (int v = 0; v < n; ++v)
    b.set_type(v, v < num_types ? v
                                : static_cast<int>(rng.below(num_types)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) b.add_edge(i, j);
  return b.build();
}

}  // namespace setemb

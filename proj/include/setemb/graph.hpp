#pragma once

// Graph data model: typed node partition, undirected binary edges, partial
// labels, file ingestion, adjacency construction, neighbor queries and
// train/test split generation.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "setemb/common.hpp"
#include "setemb/linalg.hpp"

namespace setemb {

enum class LabelMode { Multiclass, Multilabel };

inline std::string to_string(LabelMode m) {
  return m == LabelMode::Multiclass ? "multiclass" : "multilabel";
}

inline LabelMode label_mode_from_string(const std::string& s) {
  if (s == "multiclass") return LabelMode::Multiclass;
  if (s == "multilabel") return LabelMode::Multilabel;
  throw ConfigError("unknown label mode: " + s);
}

struct Graph {
  int n = 0;
  int num_types = 1;
  std::vector<int> node_type;               // size n, values in [0, num_types)
  std::vector<std::vector<int>> type_nodes; // V_k, ascending node ids
  std::vector<int> pos_in_type;             // index of node within its V_k
  std::vector<std::pair<int, int>> edges;   // u < v, sorted lexicographically
  std::vector<std::vector<int>> adj;        // ascending neighbor lists

  LabelMode mode = LabelMode::Multiclass;
  std::vector<int> cls;                     // class index, -1 if unlabeled
  std::vector<std::vector<int>> labelset;   // sorted label sets (multilabel)
  int num_classes = 0;                      // C (multiclass) or L (multilabel)

  bool labeled(int v) const {
    return mode == LabelMode::Multiclass ? cls[v] >= 0 : !labelset[v].empty();
  }

  std::vector<int> labeled_nodes() const {
    std::vector<int> out;
    for (int v = 0; v < n; ++v)
      if (labeled(v)) out.push_back(v);
    return out;
  }

  bool operator==(const Graph& o) const {
    return n == o.n && num_types == o.num_types && node_type == o.node_type &&
           edges == o.edges && mode == o.mode && cls == o.cls &&
           labelset == o.labelset;
  }
};

struct Split {
  std::vector<int> train_nodes;  // ascending
  std::vector<int> test_nodes;   // ascending
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void finalize_structure(Graph& g) {
  g.type_nodes.assign(g.num_types, {});
  g.pos_in_type.assign(g.n, 0);
  for (int v = 0; v < g.n; ++v) {
    g.pos_in_type[v] = static_cast<int>(g.type_nodes[g.node_type[v]].size());
    g.type_nodes[g.node_type[v]].push_back(v);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  g.adj.assign(g.n, {});
  for (auto [u, v] : g.edges) {
    g.adj[u].push_back(v);
    g.adj[v].push_back(u);
  }
  for (auto& list : g.adj) std::sort(list.begin(), list.end());
}

inline void refresh_num_classes(Graph& g) {
  int top = -1;
  if (g.mode == LabelMode::Multiclass) {
    for (int c : g.cls) top = std::max(top, c);
  } else {
    for (const auto& s : g.labelset)
      for (int l : s) top = std::max(top, l);
  }
  g.num_classes = top + 1;
}

// Parses "a b" integer-pair lines; ignores blank lines and '#' comments.
template <typename Fn>
void for_each_pair_line(const std::string& path, const char* what, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ParseError(std::string(what) + " file not found: " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    long long a = -1, b = -1;
    std::string extra;
    if (!(ss >> a >> b) || (ss >> extra) || a < 0 || b < 0) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected two non-negative integers");
    }
    fn(static_cast<int>(a), static_cast<int>(b));
  }
}

}  // namespace detail

/// Loads a graph from an edge list, an optional node-type file and a label
/// file. Input arcs are symmetrized, self-loops dropped, duplicates
/// collapsed. With no type file, all nodes are type 0.
inline Graph load_graph(const std::string& edge_path,
                        const std::optional<std::string>& type_path,
                        const std::string& label_path, LabelMode mode) {
  Graph g;
  g.mode = mode;

  std::vector<std::pair<int, int>> raw_edges;
  int max_id = -1;
  detail::for_each_pair_line(edge_path, "edge", [&](int u, int v) {
    max_id = std::max(max_id, std::max(u, v));
    if (u == v) return;  // self-loop: dropped
    raw_edges.emplace_back(std::min(u, v), std::max(u, v));
  });

  std::map<int, int> type_of;
  if (type_path) {
    detail::for_each_pair_line(*type_path, "type", [&](int v, int t) {
      auto it = type_of.find(v);
      if (it != type_of.end() && it->second != t)
        throw ValidationError("node " + std::to_string(v) +
                              " assigned two different types");
      type_of[v] = t;
      max_id = std::max(max_id, v);
    });
  }

  g.n = max_id + 1;
  if (g.n <= 0) throw ValidationError("graph has no nodes: " + edge_path);

  if (type_path) {
    g.node_type.assign(g.n, -1);
    int max_type = 0;
    for (auto [v, t] : type_of) {
      g.node_type[v] = t;
      max_type = std::max(max_type, t);
    }
    for (int v = 0; v < g.n; ++v)
      if (g.node_type[v] < 0)
        throw ValidationError("node " + std::to_string(v) +
                              " has no type in " + *type_path);
    g.num_types = max_type + 1;
  } else {
    g.node_type.assign(g.n, 0);
    g.num_types = 1;
  }

  g.cls.assign(g.n, -1);
  g.labelset.assign(g.n, {});
  detail::for_each_pair_line(label_path, "label", [&](int v, int y) {
    if (v >= g.n)
      throw ValidationError("label references unknown node " +
                            std::to_string(v));
    if (mode == LabelMode::Multiclass) {
      if (g.cls[v] >= 0 && g.cls[v] != y)
        throw ValidationError("node " + std::to_string(v) +
                              " labeled with two different classes");
      g.cls[v] = y;
    } else {
      g.labelset[v].push_back(y);
    }
  });
  for (auto& s : g.labelset) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  detail::refresh_num_classes(g);

  g.edges = std::move(raw_edges);
  detail::finalize_structure(g);
  return g;
}

/// Dense symmetric 0/1 adjacency matrix with zero diagonal.
inline Mat adjacency(const Graph& g) {
  Mat A(g.n, g.n);
  for (auto [u, v] : g.edges) {
    A(u, v) = 1.0;
    A(v, u) = 1.0;
  }
  return A;
}

/// Step-n neighbors of v restricted to type k: nodes reachable from v by at
/// least one walk of length exactly n (support of the A^n column), sorted
/// ascending.
inline std::vector<int> neighbors(const Graph& g, int v, int step, int k) {
  if (v < 0 || v >= g.n) throw ArgumentError("neighbors: node id out of range");
  if (k < 0 || k >= g.num_types)
    throw ArgumentError("neighbors: type index out of range");
  if (step < 1) throw ArgumentError("neighbors: step must be >= 1");
  std::vector<char> cur(g.n, 0), next(g.n, 0);
  cur[v] = 1;
  for (int s = 0; s < step; ++s) {
    std::fill(next.begin(), next.end(), 0);
    for (int u = 0; u < g.n; ++u) {
      if (!cur[u]) continue;
      for (int w : g.adj[u]) next[w] = 1;
    }
    std::swap(cur, next);
  }
  std::vector<int> out;
  for (int u = 0; u < g.n; ++u)
    if (cur[u] && g.node_type[u] == k) out.push_back(u);
  return out;
}

/// Uniform (unstratified) random split of the labeled nodes. Train size is
/// floor(fraction * |labeled|); both sides sorted ascending.
inline Split make_split(const Graph& g, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("split fraction must be in (0,1)");
  std::vector<int> pool = g.labeled_nodes();
  if (pool.size() < 2)
    throw ConfigError("need at least 2 labeled nodes to split");
  const auto train_size =
      static_cast<std::size_t>(fraction * static_cast<double>(pool.size()));
  if (train_size == 0 || train_size == pool.size())
    throw ConfigError("split fraction yields an empty train or test set");
  Rng rng(mix64(seed, 0x53504c4954ULL));  // "SPLIT"
  rng.shuffle(pool);
  Split s;
  s.fraction = fraction;
  s.seed = seed;
  s.train_nodes.assign(pool.begin(), pool.begin() + train_size);
  s.test_nodes.assign(pool.begin() + train_size, pool.end());
  std::sort(s.train_nodes.begin(), s.train_nodes.end());
  std::sort(s.test_nodes.begin(), s.test_nodes.end());
  return s;
}

// ---------------------------------------------------------------------------
// JSON serialization: {n, types, edges, labels, mode}
// ---------------------------------------------------------------------------

inline nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["n"] = g.n;
  j["types"] = g.node_type;
  auto edges = nlohmann::json::array();
  for (auto [u, v] : g.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  auto labels = nlohmann::json::array();
  for (int v = 0; v < g.n; ++v) {
    if (!g.labeled(v)) continue;
    if (g.mode == LabelMode::Multiclass)
      labels.push_back({v, g.cls[v]});
    else
      labels.push_back({v, g.labelset[v]});
  }
  j["labels"] = std::move(labels);
  j["mode"] = to_string(g.mode);
  return j;
}

inline Graph graph_from_json(const nlohmann::json& j) {
  Graph g;
  g.n = j.at("n").get<int>();
  g.node_type = j.at("types").get<std::vector<int>>();
  if (static_cast<int>(g.node_type.size()) != g.n)
    throw ValidationError("graph json: types length != n");
  g.num_types = 1;
  for (int t : g.node_type) g.num_types = std::max(g.num_types, t + 1);
  g.mode = label_mode_from_string(j.at("mode").get<std::string>());
  for (const auto& e : j.at("edges")) {
    int u = e.at(0).get<int>(), v = e.at(1).get<int>();
    if (u < 0 || v < 0 || u >= g.n || v >= g.n || u == v)
      throw ValidationError("graph json: bad edge");
    g.edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  g.cls.assign(g.n, -1);
  g.labelset.assign(g.n, {});
  for (const auto& l : j.at("labels")) {
    int v = l.at(0).get<int>();
    if (v < 0 || v >= g.n) throw ValidationError("graph json: bad label node");
    if (g.mode == LabelMode::Multiclass)
      g.cls[v] = l.at(1).get<int>();
    else
      g.labelset[v] = l.at(1).get<std::vector<int>>();
  }
  detail::refresh_num_classes(g);
  detail::finalize_structure(g);
  return g;
}

/// Content hash of the adjacency structure (node count + edge set); keys the
/// spectral basis cache.
inline std::uint64_t adjacency_hash(const Graph& g) {
  std::uint64_t h = fnv1a(&g.n, sizeof(g.n));
  for (auto [u, v] : g.edges) {
    std::uint32_t uv[2] = {static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(v)};
    h = fnv1a(uv, sizeof(uv), h);
  }
  return h;
}

}  // namespace setemb

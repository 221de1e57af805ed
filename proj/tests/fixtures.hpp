#pragma once

#include <set>
#include <vector>

#include "hagnn/hetgraph.hpp"
#include "hagnn/metapath.hpp"
#include "hagnn/rng.hpp"
#include "hagnn/sparse.hpp"

namespace fixtures {

using namespace hagnn;

/// Two-type schema: Author (4) -- writes --> Paper (3), plus the reverse.
/// writes: A0-P0, A1-P0, A1-P1, A2-P1, A2-P2, A3-P2.
inline HeterogeneousGraph bipartite_ap() {
  HeterogeneousGraph g;
  g.node_types = {{0, "A", 4, 4, false}, {1, "P", 3, 3, false}};
  g.edge_types = {{0, "writes", 0, 1, -1}, {1, "writes_rev", 1, 0, 0}};
  SparseAdjacency ap = SparseAdjacency::from_coo(
      4, 3, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {2, 1, 1}, {2, 2, 1}, {3, 2, 1}});
  g.adjacency = {ap, reverse_adjacency(ap)};
  g.features.resize(2);
  g.features[0] = DenseMatrix::zeros(4, 4);
  g.features[1] = DenseMatrix::zeros(3, 3);
  for (int i = 0; i < 4; ++i) g.features[0].at(i, i) = 1.0;
  for (int i = 0; i < 3; ++i) g.features[1].at(i, i) = 1.0;
  g.labels.resize(2);
  g.splits.resize(2);
  return g;
}

inline MetaPath apa_path(const HeterogeneousGraph& g) {
  return resolve_metapath(g, "A-P-A");
}

/// Random bipartite A-P graph with edge probability p; used for
/// brute-force path-count oracles.
inline HeterogeneousGraph random_bipartite(int64_t na, int64_t np, double p, Rng& rng) {
  HeterogeneousGraph g;
  g.node_types = {{0, "A", na, na, false}, {1, "P", np, np, false}};
  g.edge_types = {{0, "ap", 0, 1, -1}, {1, "pa", 1, 0, 0}};
  std::vector<SparseAdjacency::Entry> entries;
  for (int64_t i = 0; i < na; ++i)
    for (int64_t j = 0; j < np; ++j)
      if (rng.uniform() < p) entries.push_back({i, j, 1});
  SparseAdjacency ap = SparseAdjacency::from_coo(na, np, std::move(entries));
  g.adjacency = {ap, reverse_adjacency(ap)};
  g.features.resize(2);
  g.features[0] = DenseMatrix::zeros(na, na);
  g.features[1] = DenseMatrix::zeros(np, np);
  for (int64_t i = 0; i < na; ++i) g.features[0].at(i, i) = 1.0;
  for (int64_t i = 0; i < np; ++i) g.features[1].at(i, i) = 1.0;
  g.labels.resize(2);
  g.splits.resize(2);
  return g;
}

/// Brute-force path-instance counter: DFS over the relation chain.
inline int64_t count_paths(const HeterogeneousGraph& g, const MetaPath& p, int64_t start,
                           int64_t end) {
  std::vector<std::pair<int64_t, int64_t>> frontier = {{start, 1}};
  for (int r : p.edge_types) {
    std::vector<std::pair<int64_t, int64_t>> next;
    const auto& adj = g.adjacency[static_cast<size_t>(r)];
    for (auto [node, mult] : frontier)
      for (const auto& e : adj.entries)
        if (e.row == node) next.push_back({e.col, mult * e.weight});
    frontier = std::move(next);
  }
  int64_t total = 0;
  for (auto [node, mult] : frontier)
    if (node == end) total += mult;
  return total;
}

inline SparseAdjacency random_sparse(int64_t rows, int64_t cols, double p, Rng& rng,
                                     int64_t max_w = 3) {
  std::vector<SparseAdjacency::Entry> entries;
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      if (rng.uniform() < p) entries.push_back({i, j, 1 + rng.uniform_int(max_w)});
  return SparseAdjacency::from_coo(rows, cols, std::move(entries));
}

inline std::vector<std::vector<int64_t>> to_dense(const SparseAdjacency& a) {
  std::vector<std::vector<int64_t>> m(static_cast<size_t>(a.rows),
                                      std::vector<int64_t>(static_cast<size_t>(a.cols), 0));
  for (const auto& e : a.entries)
    m[static_cast<size_t>(e.row)][static_cast<size_t>(e.col)] = e.weight;
  return m;
}

}  // namespace fixtures

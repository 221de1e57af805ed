#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagnn/hetgraph.hpp"
#include "hagnn/sparse.hpp"

namespace hagnn {

/// Homogeneous graph over one node type; weights are exact path-instance
/// counts of the generating meta-path.
struct MetaPathGraph {
  int node_type = 0;
  MetaPath meta_path;
  SparseAdjacency adjacency;  // square
};

/// Union of the member meta-path graphs of one type; weights are summed
/// path-instance counts.
struct FusedMetaPathGraph {
  int node_type = 0;
  std::vector<MetaPath> meta_paths;
  SparseAdjacency adjacency;
};

struct MetaPathOptions {
  int64_t nnz_budget = 1'500'000'000;  // entries, not bytes
  bool include_diagonal = true;        // self-loop path counts (u == v)
};

/// Chained sparse product over the meta-path's relations (exact counts).
inline MetaPathGraph build_metapath_graph(const HeterogeneousGraph& g, const MetaPath& p,
                                          const MetaPathOptions& opt = {}) {
  if (!p.composable(g) || !p.closed(g))
    throw std::invalid_argument("meta-path not composable: " + p.name);
  MetaPathGraph out;
  out.node_type = p.head_type(g);
  out.meta_path = p;
  out.adjacency = g.adjacency[static_cast<size_t>(p.edge_types.front())];
  for (size_t i = 1; i < p.edge_types.size(); ++i) {
    out.adjacency = spgemm(out.adjacency, g.adjacency[static_cast<size_t>(p.edge_types[i])],
                           opt.nnz_budget, p.name + "[" + std::to_string(i) + "]");
  }
  if (!opt.include_diagonal) {
    std::erase_if(out.adjacency.entries,
                  [](const SparseAdjacency::Entry& e) { return e.row == e.col; });
  }
  return out;
}

/// Node types whose node share exceeds `threshold` and that have at least
/// one closed meta-path in the catalog.
inline std::set<int> select_types(const HeterogeneousGraph& g, double threshold,
                                  const std::map<int, std::vector<MetaPath>>& catalog) {
  if (threshold < 0.0 || threshold >= 1.0)
    throw std::invalid_argument("select_types: threshold must be in [0,1)");
  std::set<int> out;
  double total = static_cast<double>(g.total_nodes());
  for (const auto& t : g.node_types) {
    auto it = catalog.find(t.id);
    if (it == catalog.end()) continue;
    bool has_closed = std::any_of(it->second.begin(), it->second.end(), [&](const MetaPath& p) {
      return p.closed(g) && p.head_type(g) == t.id;
    });
    if (!has_closed) continue;
    if (static_cast<double>(t.count) / total > threshold) out.insert(t.id);
  }
  return out;
}

/// Edge-set union with summed weights; deterministic canonical ordering.
inline FusedMetaPathGraph fuse_metapath_graphs(const std::vector<MetaPathGraph>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("fuse: empty graph list");
  FusedMetaPathGraph out;
  out.node_type = graphs.front().node_type;
  std::vector<SparseAdjacency::Entry> all;
  for (const auto& mg : graphs) {
    if (mg.node_type != out.node_type) throw std::invalid_argument("type mismatch in fusion");
    out.meta_paths.push_back(mg.meta_path);
    all.insert(all.end(), mg.adjacency.entries.begin(), mg.adjacency.entries.end());
  }
  out.adjacency = SparseAdjacency::from_coo(graphs.front().adjacency.rows,
                                            graphs.front().adjacency.cols, std::move(all));
  return out;
}

struct Redundancy {
  double jaccard = 0.0;
  double containment = 0.0;
};

/// Edge-set overlap, weights ignored. jaccard = |A∩B| / |A∪B|,
/// containment = |A∩B| / min(|A|,|B|).
inline Redundancy information_redundancy(const MetaPathGraph& a, const MetaPathGraph& b) {
  if (a.node_type != b.node_type)
    throw std::invalid_argument("information_redundancy: node type mismatch");
  if (a.adjacency.entries.empty() && b.adjacency.entries.empty())
    throw std::invalid_argument("undefined redundancy: both edge sets empty");
  size_t inter = 0;
  size_t ia = 0, ib = 0;
  const auto& ea = a.adjacency.entries;
  const auto& eb = b.adjacency.entries;
  auto key = [](const SparseAdjacency::Entry& e) { return std::pair(e.row, e.col); };
  while (ia < ea.size() && ib < eb.size()) {
    if (key(ea[ia]) == key(eb[ib])) {
      ++inter;
      ++ia;
      ++ib;
    } else if (key(ea[ia]) < key(eb[ib])) {
      ++ia;
    } else {
      ++ib;
    }
  }
  size_t uni = ea.size() + eb.size() - inter;
  size_t mn = std::min(ea.size(), eb.size());
  Redundancy r;
  r.jaccard = static_cast<double>(inter) / static_cast<double>(uni);
  r.containment = mn == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(mn);
  return r;
}

struct ReductionStats {
  int64_t summed_member_edges = 0;
  int64_t fused_edges = 0;
  double reduction_rate = 0.0;  // 1 - fused/summed
};

inline ReductionStats reduction_report(const std::vector<MetaPathGraph>& graphs,
                                       const FusedMetaPathGraph& fused) {
  ReductionStats s;
  for (const auto& g : graphs) s.summed_member_edges += g.adjacency.nnz();
  s.fused_edges = fused.adjacency.nnz();
  if (s.summed_member_edges > 0)
    s.reduction_rate =
        1.0 - static_cast<double>(s.fused_edges) / static_cast<double>(s.summed_member_edges);
  return s;
}

// ---------------------------------------------------------------------------
// Meta-path catalog parsing
// ---------------------------------------------------------------------------

/// Resolves a meta-path spelled as a node-type-name chain ("A-P-A"):
/// each consecutive pair picks the unique edge type with those endpoint
/// types. Ambiguous schemas must use the edge-type chain form
/// "edges:ap,pa" (comma-separated edge-type names).
inline MetaPath resolve_metapath(const HeterogeneousGraph& g, const std::string& text) {
  MetaPath p;
  p.name = text;
  if (text.rfind("edges:", 0) == 0) {
    std::stringstream ss(text.substr(6));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      int r = g.find_edge_type(tok);
      if (r < 0) throw std::invalid_argument("unknown edge type '" + tok + "' in " + text);
      p.edge_types.push_back(r);
    }
  } else {
    std::vector<int> types;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, '-')) {
      int t = g.find_node_type(tok);
      if (t < 0) throw std::invalid_argument("unknown node type '" + tok + "' in " + text);
      types.push_back(t);
    }
    if (types.size() < 2) throw std::invalid_argument("meta-path too short: " + text);
    for (size_t i = 0; i + 1 < types.size(); ++i) {
      int found = -1;
      for (const auto& r : g.edge_types) {
        if (r.src_type == types[i] && r.dst_type == types[i + 1]) {
          if (found >= 0)
            throw std::invalid_argument("ambiguous step " + std::to_string(i) + " in " + text +
                                        "; use the edges: form");
          found = r.id;
        }
      }
      if (found < 0)
        throw std::invalid_argument("no relation for step " + std::to_string(i) + " in " + text);
      p.edge_types.push_back(found);
    }
  }
  if (!p.composable(g)) throw std::invalid_argument("meta-path not composable: " + text);
  return p;
}

/// Catalog file: one line per node type,
///   <node-type-name>: <path>, <path>, ...
/// '#' starts a comment.
inline std::map<int, std::vector<MetaPath>> load_metapath_catalog(const HeterogeneousGraph& g,
                                                                  const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open meta-path catalog " + path.string());
  std::map<int, std::vector<MetaPath>> catalog;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string type_name = trim(line.substr(0, colon));
    int t = g.find_node_type(type_name);
    if (t < 0) throw std::invalid_argument("catalog: unknown node type '" + type_name + "'");
    std::string paths_text = line.substr(colon + 1);
    // The edges: form contains commas inside one path; split on ';' first,
    // then fall back to ',' for the plain chain form.
    char sep = paths_text.find(';') != std::string::npos ||
                       paths_text.find("edges:") != std::string::npos
                   ? ';'
                   : ',';
    std::stringstream ss(paths_text);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
      tok = trim(tok);
      if (tok.empty()) continue;
      catalog[t].push_back(resolve_metapath(g, tok));
    }
  }
  return catalog;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline void write_fused_graph(const FusedMetaPathGraph& fused, const HeterogeneousGraph& g,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string type_name = g.node_types[static_cast<size_t>(fused.node_type)].name;
  {
    std::ofstream out(out_dir / ("fused_" + type_name + ".tsv"));
    for (const auto& e : fused.adjacency.entries)
      out << e.row << '\t' << e.col << '\t' << e.weight << '\n';
  }
  {
    std::ofstream out(out_dir / ("fused_" + type_name + ".stats"));
    out << "node_type\t" << type_name << '\n';
    out << "nodes\t" << fused.adjacency.rows << '\n';
    out << "edges\t" << fused.adjacency.nnz() << '\n';
    out << "meta_paths\t";
    for (size_t i = 0; i < fused.meta_paths.size(); ++i)
      out << (i ? "," : "") << fused.meta_paths[i].name;
    out << '\n';
  }
}

}  // namespace hagnn

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagnn/rng.hpp"
#include "hagnn/sparse.hpp"

namespace hagnn {

struct NodeType {
  int id = 0;
  std::string name;
  int64_t count = 0;
  int64_t feature_dim = 0;  // width of stored features (post-synthesis)
  bool featureless = false; // true when features were synthesized
};

struct EdgeType {
  int id = 0;
  std::string name;
  int src_type = 0;
  int dst_type = 0;
  int reverse_of = -1;  // id of the base relation when this is a derived reverse
};

struct DenseMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> v;  // row-major

  double& at(int64_t r, int64_t c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * cols + c)]; }

  static DenseMatrix zeros(int64_t r, int64_t c) {
    return DenseMatrix{r, c, std::vector<double>(static_cast<size_t>(r * c), 0.0)};
  }
};

/// Per-type train/val/test masks; empty vectors mean "no split info".
struct SplitMasks {
  std::vector<uint8_t> train, val, test;
};

/// Immutable after construction; share freely across threads read-only.
struct HeterogeneousGraph {
  std::vector<NodeType> node_types;
  std::vector<EdgeType> edge_types;
  std::vector<SparseAdjacency> adjacency;  // one per edge type
  std::vector<DenseMatrix> features;       // one per node type
  std::vector<DenseMatrix> labels;         // rows == 0 when the type is unlabeled
  std::vector<SplitMasks> splits;

  int64_t total_nodes() const {
    int64_t n = 0;
    for (const auto& t : node_types) n += t.count;
    return n;
  }

  int find_node_type(const std::string& name) const {
    for (const auto& t : node_types)
      if (t.name == name) return t.id;
    return -1;
  }

  int find_edge_type(const std::string& name) const {
    for (const auto& r : edge_types)
      if (r.name == name) return r.id;
    return -1;
  }
};

/// Closed sequence of edge types; consecutive steps chain dst -> src.
struct MetaPath {
  std::vector<int> edge_types;
  std::string name;  // display form, e.g. "A-P-A"

  size_t length() const { return edge_types.size(); }

  bool composable(const HeterogeneousGraph& g) const {
    if (edge_types.empty()) return false;
    for (int r : edge_types)
      if (r < 0 || r >= static_cast<int>(g.edge_types.size())) return false;
    for (size_t i = 0; i + 1 < edge_types.size(); ++i) {
      if (g.edge_types[static_cast<size_t>(edge_types[i])].dst_type !=
          g.edge_types[static_cast<size_t>(edge_types[i + 1])].src_type)
        return false;
    }
    return true;
  }

  int head_type(const HeterogeneousGraph& g) const {
    return g.edge_types[static_cast<size_t>(edge_types.front())].src_type;
  }
  int tail_type(const HeterogeneousGraph& g) const {
    return g.edge_types[static_cast<size_t>(edge_types.back())].dst_type;
  }
  bool closed(const HeterogeneousGraph& g) const {
    return composable(g) && head_type(g) == tail_type(g);
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Collects every invariant violation; never throws, never mutates.
inline ValidationReport validate_graph(const HeterogeneousGraph& g) {
  ValidationReport rep;
  auto fail = [&rep](std::string msg) { rep.violations.push_back(std::move(msg)); };

  if (static_cast<int64_t>(g.node_types.size()) + static_cast<int64_t>(g.edge_types.size()) <= 2)
    fail("not heterogeneous: |T|+|R| <= 2");

  for (size_t i = 0; i < g.node_types.size(); ++i) {
    const auto& t = g.node_types[i];
    if (t.id != static_cast<int>(i)) fail("node type ids not contiguous at index " + std::to_string(i));
    if (t.count < 1) fail("node type '" + t.name + "' has count < 1");
    if (t.feature_dim < 0) fail("node type '" + t.name + "' has negative feature_dim");
  }
  for (size_t i = 0; i < g.edge_types.size(); ++i) {
    const auto& r = g.edge_types[i];
    if (r.id != static_cast<int>(i)) fail("edge type ids not contiguous at index " + std::to_string(i));
    if (r.src_type < 0 || r.src_type >= static_cast<int>(g.node_types.size()) ||
        r.dst_type < 0 || r.dst_type >= static_cast<int>(g.node_types.size()))
      fail("edge type '" + r.name + "' references missing node type");
  }

  if (g.adjacency.size() != g.edge_types.size()) {
    fail("adjacency count != edge type count");
    return rep;
  }
  for (size_t i = 0; i < g.edge_types.size(); ++i) {
    const auto& r = g.edge_types[i];
    const auto& a = g.adjacency[i];
    if (r.src_type >= 0 && r.src_type < static_cast<int>(g.node_types.size()) &&
        a.rows != g.node_types[static_cast<size_t>(r.src_type)].count)
      fail("adjacency of '" + r.name + "': rows != src type count");
    if (r.dst_type >= 0 && r.dst_type < static_cast<int>(g.node_types.size()) &&
        a.cols != g.node_types[static_cast<size_t>(r.dst_type)].count)
      fail("adjacency of '" + r.name + "': cols != dst type count");
    for (size_t k = 0; k < a.entries.size(); ++k) {
      const auto& e = a.entries[k];
      if (e.row < 0 || e.row >= a.rows || e.col < 0 || e.col >= a.cols) {
        fail("adjacency of '" + r.name + "': index out of range");
        break;
      }
      if (e.weight <= 0) {
        fail("adjacency of '" + r.name + "': non-positive weight");
        break;
      }
      if (k > 0) {
        const auto& p = a.entries[k - 1];
        if (p.row > e.row || (p.row == e.row && p.col >= e.col)) {
          fail("adjacency of '" + r.name + "': entries not sorted/deduplicated");
          break;
        }
      }
    }
  }

  for (size_t t = 0; t < g.node_types.size() && t < g.features.size(); ++t) {
    const auto& f = g.features[t];
    if (f.rows != g.node_types[t].count || f.cols != g.node_types[t].feature_dim)
      fail("features of '" + g.node_types[t].name + "': shape mismatch");
  }

  for (size_t t = 0; t < g.splits.size() && t < g.node_types.size(); ++t) {
    const auto& s = g.splits[t];
    if (s.train.empty()) continue;
    int64_t n = g.node_types[t].count;
    if (static_cast<int64_t>(s.train.size()) != n || static_cast<int64_t>(s.val.size()) != n ||
        static_cast<int64_t>(s.test.size()) != n) {
      fail("splits of '" + g.node_types[t].name + "': mask length mismatch");
      continue;
    }
    bool labeled_ok = true, disjoint = true;
    for (int64_t i = 0; i < n; ++i) {
      int m = (s.train[static_cast<size_t>(i)] ? 1 : 0) + (s.val[static_cast<size_t>(i)] ? 1 : 0) +
              (s.test[static_cast<size_t>(i)] ? 1 : 0);
      if (m > 1) disjoint = false;
      bool labeled = false;
      if (t < g.labels.size() && g.labels[t].rows == n) {
        for (int64_t c = 0; c < g.labels[t].cols; ++c)
          if (g.labels[t].at(i, c) != 0.0) labeled = true;
      }
      if (labeled && m != 1) labeled_ok = false;
    }
    if (!disjoint) fail("splits of '" + g.node_types[t].name + "': masks not disjoint");
    if (!labeled_ok) fail("splits of '" + g.node_types[t].name + "': labeled node not in exactly one split");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// HGB-style dataset loading
// ---------------------------------------------------------------------------

struct LoadOptions {
  uint64_t seed = 0;
  int64_t onehot_cap = 10000;   // featureless types up to this size get identity features
  int64_t synth_dim = 64;       // otherwise seeded normal features of this width
  double val_fraction = 0.2;    // carved out of label.dat deterministically
  bool add_reverse_relations = true;
};

struct LoadedDataset {
  HeterogeneousGraph graph;
  // global file id -> (node type, local id); local ids are assigned in
  // ascending global-id order within each type.
  std::vector<std::pair<int, int64_t>> global_to_local;
  std::vector<std::string> node_names;  // by global id
  std::vector<std::vector<int64_t>> local_to_global;  // per type

  void write_node_map(const std::filesystem::path& path) const {
    std::ofstream out(path);
    for (size_t gid = 0; gid < global_to_local.size(); ++gid) {
      if (global_to_local[gid].first < 0) continue;
      out << gid << '\t' << global_to_local[gid].first << '\t' << global_to_local[gid].second
          << '\n';
    }
  }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

inline std::vector<double> parse_floats(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

inline std::vector<int64_t> parse_ints(const std::string& csv) {
  std::vector<int64_t> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoll(tok));
  }
  return out;
}

}  // namespace detail

/// Loads an HGB-style dataset directory (node.dat, link.dat, optional
/// label.dat / label.dat.test). Global node ids are remapped to per-type
/// contiguous local ids. Featureless types receive synthetic features per
/// LoadOptions. When add_reverse_relations is set, a reversed relation
/// "<name>_rev" is appended for every relation whose transpose is not
/// already present.
inline LoadedDataset load_hgb_dataset(const std::filesystem::path& dir, const LoadOptions& opt = {}) {
  LoadedDataset ds;
  HeterogeneousGraph& g = ds.graph;

  // --- node.dat ---
  std::ifstream nodes(dir / "node.dat");
  if (!nodes) throw std::runtime_error("cannot open " + (dir / "node.dat").string());
  struct RawNode {
    int64_t gid;
    std::string name;
    int type;
    std::vector<double> feat;
  };
  std::vector<RawNode> raw_nodes;
  int max_type = -1;
  std::string line;
  while (std::getline(nodes, line)) {
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() < 3) throw std::runtime_error("malformed node.dat line: " + line);
    RawNode rn;
    rn.gid = std::stoll(f[0]);
    rn.name = f[1];
    rn.type = std::stoi(f[2]);
    if (f.size() > 3 && !f[3].empty()) rn.feat = detail::parse_floats(f[3]);
    max_type = std::max(max_type, rn.type);
    raw_nodes.push_back(std::move(rn));
  }
  if (raw_nodes.empty()) throw std::runtime_error("node.dat is empty");
  std::sort(raw_nodes.begin(), raw_nodes.end(),
            [](const RawNode& a, const RawNode& b) { return a.gid < b.gid; });

  int n_types = max_type + 1;
  g.node_types.resize(static_cast<size_t>(n_types));
  ds.local_to_global.resize(static_cast<size_t>(n_types));
  int64_t max_gid = raw_nodes.back().gid;
  ds.global_to_local.assign(static_cast<size_t>(max_gid) + 1, {-1, -1});
  ds.node_names.assign(static_cast<size_t>(max_gid) + 1, "");
  for (const auto& rn : raw_nodes) {
    auto& t = g.node_types[static_cast<size_t>(rn.type)];
    ds.global_to_local[static_cast<size_t>(rn.gid)] = {rn.type, t.count};
    ds.node_names[static_cast<size_t>(rn.gid)] = rn.name;
    ds.local_to_global[static_cast<size_t>(rn.type)].push_back(rn.gid);
    t.count++;
  }
  for (int t = 0; t < n_types; ++t) {
    g.node_types[static_cast<size_t>(t)].id = t;
    g.node_types[static_cast<size_t>(t)].name = "t" + std::to_string(t);
    if (g.node_types[static_cast<size_t>(t)].count == 0)
      throw std::runtime_error("node type " + std::to_string(t) + " has no nodes");
  }

  // Features: a type is attributed iff its first node carries a vector.
  g.features.resize(static_cast<size_t>(n_types));
  for (int t = 0; t < n_types; ++t) {
    auto& nt = g.node_types[static_cast<size_t>(t)];
    int64_t dim = -1;
    for (const auto& rn : raw_nodes) {
      if (rn.type != t) continue;
      int64_t d = static_cast<int64_t>(rn.feat.size());
      if (dim < 0)
        dim = d;
      else if (d != dim)
        throw std::runtime_error("inconsistent feature width within node type " + std::to_string(t));
    }
    if (dim > 0) {
      nt.feature_dim = dim;
      auto m = DenseMatrix::zeros(nt.count, dim);
      for (const auto& rn : raw_nodes) {
        if (rn.type != t) continue;
        int64_t local = ds.global_to_local[static_cast<size_t>(rn.gid)].second;
        std::copy(rn.feat.begin(), rn.feat.end(), m.v.begin() + local * dim);
      }
      g.features[static_cast<size_t>(t)] = std::move(m);
    } else {
      nt.featureless = true;
      if (nt.count <= opt.onehot_cap) {
        nt.feature_dim = nt.count;
        auto m = DenseMatrix::zeros(nt.count, nt.count);
        for (int64_t i = 0; i < nt.count; ++i) m.at(i, i) = 1.0;
        g.features[static_cast<size_t>(t)] = std::move(m);
      } else {
        nt.feature_dim = opt.synth_dim;
        auto m = DenseMatrix::zeros(nt.count, opt.synth_dim);
        Rng rng(opt.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(t + 1)));
        for (double& x : m.v) x = rng.normal();
        g.features[static_cast<size_t>(t)] = std::move(m);
      }
    }
  }

  // --- link.dat ---
  std::ifstream links(dir / "link.dat");
  if (!links) throw std::runtime_error("cannot open " + (dir / "link.dat").string());
  std::map<int, std::vector<SparseAdjacency::Entry>> per_rel;
  std::map<int, std::pair<int, int>> rel_types;  // rel id -> (src type, dst type)
  while (std::getline(links, line)) {
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() < 3) throw std::runtime_error("malformed link.dat line: " + line);
    int64_t src = std::stoll(f[0]);
    int64_t dst = std::stoll(f[1]);
    int rel = std::stoi(f[2]);
    int64_t w = 1;
    if (f.size() > 3 && !f[3].empty()) w = static_cast<int64_t>(std::llround(std::stod(f[3])));
    if (src > max_gid || dst > max_gid || ds.global_to_local[static_cast<size_t>(src)].first < 0 ||
        ds.global_to_local[static_cast<size_t>(dst)].first < 0)
      throw std::runtime_error("link.dat references unknown node id");
    auto [st, sl] = ds.global_to_local[static_cast<size_t>(src)];
    auto [dt, dl] = ds.global_to_local[static_cast<size_t>(dst)];
    auto it = rel_types.find(rel);
    if (it == rel_types.end()) {
      rel_types[rel] = {st, dt};
    } else if (it->second != std::make_pair(st, dt)) {
      throw std::runtime_error("edge type " + std::to_string(rel) + " mixes endpoint node types");
    }
    per_rel[rel].push_back({sl, dl, w});
  }

  for (auto& [rel, entries] : per_rel) {
    auto [st, dt] = rel_types[rel];
    EdgeType et;
    et.id = static_cast<int>(g.edge_types.size());
    et.name = "r" + std::to_string(rel);
    et.src_type = st;
    et.dst_type = dt;
    g.edge_types.push_back(et);
    g.adjacency.push_back(SparseAdjacency::from_coo(g.node_types[static_cast<size_t>(st)].count,
                                                    g.node_types[static_cast<size_t>(dt)].count,
                                                    std::move(entries)));
  }

  if (opt.add_reverse_relations) {
    size_t n_base = g.edge_types.size();
    for (size_t i = 0; i < n_base; ++i) {
      SparseAdjacency rev = reverse_adjacency(g.adjacency[i]);
      // Skip when the transposed relation is already present in the data.
      bool present = false;
      for (size_t j = 0; j < n_base; ++j) {
        if (g.edge_types[j].src_type == g.edge_types[i].dst_type &&
            g.edge_types[j].dst_type == g.edge_types[i].src_type && g.adjacency[j] == rev) {
          present = true;
          break;
        }
      }
      if (present) continue;
      EdgeType et;
      et.id = static_cast<int>(g.edge_types.size());
      et.name = g.edge_types[i].name + "_rev";
      et.src_type = g.edge_types[i].dst_type;
      et.dst_type = g.edge_types[i].src_type;
      et.reverse_of = g.edge_types[i].id;
      g.edge_types.push_back(et);
      g.adjacency.push_back(std::move(rev));
    }
  }

  // --- labels ---
  g.labels.resize(static_cast<size_t>(n_types));
  g.splits.resize(static_cast<size_t>(n_types));
  struct LabeledNode {
    int type;
    int64_t local;
    std::vector<int64_t> classes;
  };
  auto read_labels = [&](const std::filesystem::path& path, std::vector<LabeledNode>& out) {
    std::ifstream in(path);
    if (!in) return false;
    std::string l;
    while (std::getline(in, l)) {
      if (l.empty()) continue;
      auto f = detail::split_tabs(l);
      if (f.size() < 4) throw std::runtime_error("malformed label line: " + l);
      int64_t gid = std::stoll(f[0]);
      auto [t, local] = ds.global_to_local[static_cast<size_t>(gid)];
      if (t < 0) throw std::runtime_error("label references unknown node id");
      out.push_back({t, local, detail::parse_ints(f[3])});
    }
    return true;
  };
  std::vector<LabeledNode> train_labels, test_labels;
  bool has_train = read_labels(dir / "label.dat", train_labels);
  bool has_test = read_labels(dir / "label.dat.test", test_labels);
  if (has_train) {
    int64_t n_classes = 0;
    for (const auto& ln : train_labels)
      for (int64_t c : ln.classes) n_classes = std::max(n_classes, c + 1);
    for (const auto& ln : test_labels)
      for (int64_t c : ln.classes) n_classes = std::max(n_classes, c + 1);
    for (int t = 0; t < n_types; ++t) {
      bool any = std::any_of(train_labels.begin(), train_labels.end(),
                             [t](const LabeledNode& ln) { return ln.type == t; });
      if (!any) continue;
      int64_t n = g.node_types[static_cast<size_t>(t)].count;
      g.labels[static_cast<size_t>(t)] = DenseMatrix::zeros(n, n_classes);
      auto& s = g.splits[static_cast<size_t>(t)];
      s.train.assign(static_cast<size_t>(n), 0);
      s.val.assign(static_cast<size_t>(n), 0);
      s.test.assign(static_cast<size_t>(n), 0);
    }
    std::vector<std::pair<int, int64_t>> train_ids;
    for (const auto& ln : train_labels) {
      for (int64_t c : ln.classes) g.labels[static_cast<size_t>(ln.type)].at(ln.local, c) = 1.0;
      g.splits[static_cast<size_t>(ln.type)].train[static_cast<size_t>(ln.local)] = 1;
      train_ids.push_back({ln.type, ln.local});
    }
    for (const auto& ln : test_labels) {
      if (g.labels[static_cast<size_t>(ln.type)].rows == 0) continue;
      for (int64_t c : ln.classes) g.labels[static_cast<size_t>(ln.type)].at(ln.local, c) = 1.0;
      if (has_test) g.splits[static_cast<size_t>(ln.type)].test[static_cast<size_t>(ln.local)] = 1;
    }
    // Deterministic validation carve-out from the training labels.
    Rng rng(opt.seed ^ 0xda3e39cb94b95bdbULL);
    for (size_t i = train_ids.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i)));
      std::swap(train_ids[i - 1], train_ids[j]);
    }
    size_t n_val = static_cast<size_t>(static_cast<double>(train_ids.size()) * opt.val_fraction);
    for (size_t i = 0; i < n_val; ++i) {
      auto [t, local] = train_ids[i];
      g.splits[static_cast<size_t>(t)].train[static_cast<size_t>(local)] = 0;
      g.splits[static_cast<size_t>(t)].val[static_cast<size_t>(local)] = 1;
    }
  }

  return ds;
}

/// Writes the graph back out in canonical HGB form (sorted global ids,
/// "%.17g" features). Loading a canonical dump and re-serializing it is
/// byte-identical.
inline void save_hgb_dataset(const LoadedDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const HeterogeneousGraph& g = ds.graph;
  char buf[64];
  {
    std::ofstream out(dir / "node.dat");
    for (size_t gid = 0; gid < ds.global_to_local.size(); ++gid) {
      auto [t, local] = ds.global_to_local[gid];
      if (t < 0) continue;
      out << gid << '\t' << ds.node_names[gid] << '\t' << t;
      const auto& nt = g.node_types[static_cast<size_t>(t)];
      out << '\t';
      if (!nt.featureless) {
        const auto& f = g.features[static_cast<size_t>(t)];
        for (int64_t c = 0; c < f.cols; ++c) {
          std::snprintf(buf, sizeof buf, "%.17g", f.at(local, c));
          out << (c ? "," : "") << buf;
        }
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "link.dat");
    for (size_t r = 0; r < g.edge_types.size(); ++r) {
      if (g.edge_types[r].reverse_of >= 0) continue;  // derived, not part of the dataset
      int st = g.edge_types[r].src_type;
      int dt = g.edge_types[r].dst_type;
      for (const auto& e : g.adjacency[r].entries) {
        out << ds.local_to_global[static_cast<size_t>(st)][static_cast<size_t>(e.row)] << '\t'
            << ds.local_to_global[static_cast<size_t>(dt)][static_cast<size_t>(e.col)] << '\t'
            << g.edge_types[r].name.substr(1) << '\t' << e.weight << '\n';
      }
    }
  }
}

}  // namespace hagnn

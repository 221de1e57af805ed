#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagnn/hetgraph.hpp"
#include "hagnn/metapath.hpp"
#include "hagnn/rng.hpp"
#include "hagnn/structsem.hpp"
#include "hagnn/tensor.hpp"

namespace hagnn {

enum class CombineMode { kConcat, kAdd };
enum class Activation { kElu, kRelu, kNone };

struct ModelConfig {
  int64_t hidden_dim = 64;      // d
  int heads = 4;                // K (inter phase only)
  int layers_intra = 2;
  int layers_inter = 2;
  double beta = 0.3;            // edge-residual mix, in [0,1]
  double leaky_slope = 0.05;
  CombineMode combine = CombineMode::kConcat;
  Activation intra_activation = Activation::kElu;
  bool use_intra = true;        // ablation switches
  bool use_inter = true;

  int64_t output_dim() const {
    return combine == CombineMode::kConcat ? 2 * hidden_dim : hidden_dim;
  }
};

struct ParamBlock {
  std::string name;
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> values;
};

/// Named learnable parameter blocks. Order is the canonical iteration
/// order for the optimizer and the checkpoint format.
struct ModelParams {
  std::vector<ParamBlock> blocks;

  ParamBlock& add(const std::string& name, int64_t rows, int64_t cols, Rng& rng) {
    double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
    ParamBlock b{name, rows, cols, {}};
    b.values.resize(static_cast<size_t>(rows * cols));
    for (double& x : b.values) x = rng.uniform(-lim, lim);
    blocks.push_back(std::move(b));
    return blocks.back();
  }

  ParamBlock& at(const std::string& name) {
    for (auto& b : blocks)
      if (b.name == name) return b;
    throw std::out_of_range("no parameter block '" + name + "'");
  }

  const ParamBlock& at(const std::string& name) const {
    return const_cast<ModelParams*>(this)->at(name);
  }

  bool has(const std::string& name) const {
    return std::any_of(blocks.begin(), blocks.end(),
                       [&](const ParamBlock& b) { return b.name == name; });
  }
};

/// Precomputed edge-list machinery for one model configuration: per-type
/// fused-graph CSR sorted by target node, delta weights, and the pooled
/// inter-phase edge list over the original graph (all relations, both
/// endpoints' views, plus a self-loop for every node).
struct ModelContext {
  const HeterogeneousGraph* graph = nullptr;
  int target_type = 0;
  std::set<int> selected_types;

  struct IntraEdges {
    std::vector<int64_t> src, dst;       // sorted by dst, then src
    std::vector<double> delta;           // normalized structural weights
    std::vector<uint8_t> has_neighbors;  // per node of the type
  };
  std::map<int, IntraEdges> intra;       // per selected type

  std::vector<int64_t> type_offset;      // node type -> first global row
  std::vector<int64_t> inter_src, inter_dst;  // global ids, sorted by dst
  std::vector<int64_t> target_rows;      // global rows of the target type
};

inline ModelContext build_model_context(
    const HeterogeneousGraph& g, int target_type, const std::set<int>& selected,
    const std::map<int, std::pair<FusedMetaPathGraph, StructuralWeights>>& fused) {
  ModelContext ctx;
  ctx.graph = &g;
  ctx.target_type = target_type;
  ctx.selected_types = selected;

  for (int t : selected) {
    auto it = fused.find(t);
    if (it == fused.end())
      throw std::invalid_argument("no fused graph for selected type " +
                                  g.node_types[static_cast<size_t>(t)].name);
    const auto& [fg, sw] = it->second;
    if (sw.weights.size() != fg.adjacency.entries.size())
      throw std::invalid_argument("structural weight support mismatch for type " +
                                  g.node_types[static_cast<size_t>(t)].name);
    ModelContext::IntraEdges edges;
    int64_t n = fg.adjacency.rows;
    edges.has_neighbors.assign(static_cast<size_t>(n), 0);
    // Entries are row-major (src-major); re-sort indices by (dst, src).
    std::vector<size_t> order(fg.adjacency.entries.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const auto& ea = fg.adjacency.entries[a];
      const auto& eb = fg.adjacency.entries[b];
      return ea.col != eb.col ? ea.col < eb.col : ea.row < eb.row;
    });
    for (size_t i : order) {
      const auto& e = fg.adjacency.entries[i];
      edges.src.push_back(e.row);
      edges.dst.push_back(e.col);
      edges.delta.push_back(sw.weights[i]);
      edges.has_neighbors[static_cast<size_t>(e.col)] = 1;
    }
    ctx.intra[t] = std::move(edges);
  }

  ctx.type_offset.resize(g.node_types.size() + 1, 0);
  for (size_t t = 0; t < g.node_types.size(); ++t)
    ctx.type_offset[t + 1] = ctx.type_offset[t] + g.node_types[t].count;
  int64_t n_total = ctx.type_offset.back();

  std::vector<std::pair<int64_t, int64_t>> pooled;  // (dst, src) global
  for (size_t r = 0; r < g.edge_types.size(); ++r) {
    const auto& et = g.edge_types[r];
    for (const auto& e : g.adjacency[r].entries) {
      int64_t s = ctx.type_offset[static_cast<size_t>(et.src_type)] + e.row;
      int64_t d = ctx.type_offset[static_cast<size_t>(et.dst_type)] + e.col;
      pooled.push_back({d, s});
    }
  }
  for (int64_t v = 0; v < n_total; ++v) pooled.push_back({v, v});  // self-loops
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  for (auto [d, s] : pooled) {
    ctx.inter_dst.push_back(d);
    ctx.inter_src.push_back(s);
  }

  int64_t off = ctx.type_offset[static_cast<size_t>(target_type)];
  for (int64_t i = 0; i < g.node_types[static_cast<size_t>(target_type)].count; ++i)
    ctx.target_rows.push_back(off + i);
  return ctx;
}

// ---------------------------------------------------------------------------
// Parameter construction
// ---------------------------------------------------------------------------

inline ModelParams init_model_params(const HeterogeneousGraph& g, const ModelContext& ctx,
                                     const ModelConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  int64_t d = cfg.hidden_dim;
  for (const auto& t : g.node_types) p.add("proj." + t.name, t.feature_dim, d, rng);
  for (int t : ctx.selected_types) {
    const std::string& tn = g.node_types[static_cast<size_t>(t)].name;
    for (int l = 0; l < cfg.layers_intra; ++l) {
      p.add("intra." + tn + ".L" + std::to_string(l) + ".W", d, d, rng);
      p.add("intra." + tn + ".L" + std::to_string(l) + ".a", 2 * d, 1, rng);
    }
  }
  for (int l = 0; l < cfg.layers_inter; ++l) {
    for (int k = 0; k < cfg.heads; ++k) {
      p.add("inter.L" + std::to_string(l) + ".h" + std::to_string(k) + ".W", d, d, rng);
      p.add("inter.L" + std::to_string(l) + ".h" + std::to_string(k) + ".a", 2 * d, 1, rng);
    }
  }
  p.add("combine.Wm", static_cast<int64_t>(cfg.heads) * d, d, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct ForwardResult {
  Tensor z;      // target-type embeddings, n_target x output_dim
  Tensor z_all;  // embeddings for every node (global row order), for link scoring
  std::map<std::string, Tensor> param_tensors;  // leaves by block name
};

namespace detail {

inline Tensor apply_activation(const Tensor& t, Activation act, double /*slope*/ = 0.0) {
  switch (act) {
    case Activation::kElu:
      return ops::elu(t);
    case Activation::kRelu:
      return ops::leaky_relu(t, 0.0);
    case Activation::kNone:
      return t;
  }
  throw std::logic_error("unknown activation");
}

/// Shared attention core for both phases: scores per edge from the
/// two-sided decomposition of a^T [W h_v || W h_u], softmax per target
/// neighborhood.
inline Tensor edge_attention(const Tensor& h, const Tensor& W, const Tensor& a,
                             const std::vector<int64_t>& src, const std::vector<int64_t>& dst,
                             double slope) {
  int64_t d = W.cols;
  Tensor wh = ops::matmul(h, W);
  std::vector<int64_t> first(static_cast<size_t>(d)), second(static_cast<size_t>(d));
  std::iota(first.begin(), first.end(), int64_t{0});
  std::iota(second.begin(), second.end(), d);
  Tensor s_dst = ops::matmul(wh, ops::gather_rows(a, first));   // target-side term
  Tensor s_src = ops::matmul(wh, ops::gather_rows(a, second));  // neighbor-side term
  Tensor e = ops::leaky_relu(
      ops::add(ops::gather_rows(s_dst, dst), ops::gather_rows(s_src, src)), slope);
  return ops::segment_softmax(e, dst);
}

}  // namespace detail

/// Runs the full two-phase forward pass and returns the target-type
/// embeddings. Parameters are placed on `tape` as leaves; gradients land
/// in result.param_tensors after tape.backward().
inline ForwardResult model_forward(Tape& tape, const ModelContext& ctx, const ModelParams& params,
                                   const ModelConfig& cfg) {
  const HeterogeneousGraph& g = *ctx.graph;
  int64_t d = cfg.hidden_dim;

  ForwardResult res;
  for (const auto& b : params.blocks)
    res.param_tensors.emplace(b.name, tape.leaf(b.rows, b.cols, b.values));
  auto P = [&res](const std::string& name) -> const Tensor& {
    auto it = res.param_tensors.find(name);
    if (it == res.param_tensors.end()) throw std::out_of_range("missing parameter " + name);
    return it->second;
  };

  // Type-specific projection.
  std::vector<Tensor> h(g.node_types.size());
  for (const auto& t : g.node_types) {
    Tensor x = Tensor::constant(t.count, t.feature_dim, g.features[static_cast<size_t>(t.id)].v);
    x.tape = &tape;
    h[static_cast<size_t>(t.id)] = ops::matmul(x, P("proj." + t.name));
  }

  // Intra-type aggregation on fused graphs; non-selected types pass through.
  if (cfg.use_intra) {
    for (int l = 0; l < cfg.layers_intra; ++l) {
      for (int t : ctx.selected_types) {
        const auto& edges = ctx.intra.at(t);
        const std::string& tn = g.node_types[static_cast<size_t>(t)].name;
        const std::string prefix = "intra." + tn + ".L" + std::to_string(l);
        Tensor& ht = h[static_cast<size_t>(t)];
        Tensor alpha =
            detail::edge_attention(ht, P(prefix + ".W"), P(prefix + ".a"), edges.src, edges.dst,
                                   cfg.leaky_slope);
        Tensor delta = Tensor::constant(static_cast<int64_t>(edges.delta.size()), 1, edges.delta);
        delta.tape = &tape;
        Tensor eta = ops::add(ops::scale(alpha, 1.0 - cfg.beta), ops::scale(delta, cfg.beta));
        Tensor msgs = ops::gather_rows(ht, edges.src);
        Tensor agg = ops::segment_weighted_sum(msgs, eta, edges.dst, ht.rows);
        Tensor act = detail::apply_activation(agg, cfg.intra_activation);
        ht = ops::row_merge(act, ht, edges.has_neighbors);
      }
    }
  }

  Tensor h_intra_all = ops::concat(h, 0);

  // Inter-type aggregation on the pooled original graph. Intermediate
  // layers average heads (keeps width d); the final layer concatenates.
  Tensor z_inter;
  if (cfg.use_inter && cfg.layers_inter > 0) {
    Tensor hg = h_intra_all;
    for (int l = 0; l < cfg.layers_inter; ++l) {
      std::vector<Tensor> heads;
      for (int k = 0; k < cfg.heads; ++k) {
        const std::string prefix = "inter.L" + std::to_string(l) + ".h" + std::to_string(k);
        Tensor alpha = detail::edge_attention(hg, P(prefix + ".W"), P(prefix + ".a"),
                                              ctx.inter_src, ctx.inter_dst, cfg.leaky_slope);
        Tensor msgs = ops::gather_rows(hg, ctx.inter_src);
        heads.push_back(ops::segment_weighted_sum(msgs, alpha, ctx.inter_dst, hg.rows));
      }
      if (l + 1 < cfg.layers_inter) {
        Tensor sum = heads.front();
        for (size_t k = 1; k < heads.size(); ++k) sum = ops::add(sum, heads[k]);
        hg = ops::scale(sum, 1.0 / static_cast<double>(cfg.heads));
      } else {
        hg = ops::concat(heads, 1);
      }
    }
    z_inter = ops::matmul(hg, P("combine.Wm"));
  } else {
    // Ablated inter branch: a zero d-wide block.
    Tensor zero = Tensor::constant(h_intra_all.rows, d,
                                   std::vector<double>(static_cast<size_t>(h_intra_all.rows * d), 0.0));
    zero.tape = &tape;
    z_inter = zero;
  }

  res.z_all = cfg.combine == CombineMode::kConcat ? ops::concat({h_intra_all, z_inter}, 1)
                                                  : ops::add(h_intra_all, z_inter);
  res.z = ops::gather_rows(res.z_all, ctx.target_rows);
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

inline void save_checkpoint(const ModelParams& params, const std::string& config_hash,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << "hagnn-checkpoint v1\n";
  out << "config_hash " << config_hash << '\n';
  out << "blocks " << params.blocks.size() << '\n';
  char buf[64];
  for (const auto& b : params.blocks) {
    out << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
    for (size_t i = 0; i < b.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", b.values[i]);
      out << buf << (((i + 1) % 8 == 0 || i + 1 == b.values.size()) ? '\n' : ' ');
    }
  }
}

inline ModelParams load_checkpoint(const std::filesystem::path& path,
                                   std::string* config_hash_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::string magic, version;
  in >> magic >> version;
  if (magic != "hagnn-checkpoint" || version != "v1")
    throw std::runtime_error("not a hagnn checkpoint: " + path.string());
  std::string kw, hash;
  in >> kw >> hash;
  if (kw != "config_hash") throw std::runtime_error("malformed checkpoint header");
  if (config_hash_out) *config_hash_out = hash;
  size_t n_blocks = 0;
  in >> kw >> n_blocks;
  if (kw != "blocks") throw std::runtime_error("malformed checkpoint header");
  ModelParams p;
  for (size_t i = 0; i < n_blocks; ++i) {
    ParamBlock b;
    in >> b.name >> b.rows >> b.cols;
    b.values.resize(static_cast<size_t>(b.rows * b.cols));
    for (double& x : b.values) in >> x;
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    p.blocks.push_back(std::move(b));
  }
  return p;
}

/// Fails loudly when the checkpoint's blocks do not match the shapes this
/// config would allocate.
inline void check_shapes(const ModelParams& loaded, const ModelParams& expected) {
  if (loaded.blocks.size() != expected.blocks.size())
    throw std::runtime_error("checkpoint shape drift: block count mismatch");
  for (const auto& b : expected.blocks) {
    const auto& lb = loaded.at(b.name);
    if (lb.rows != b.rows || lb.cols != b.cols)
      throw std::runtime_error("checkpoint shape drift in block '" + b.name + "': " +
                               std::to_string(lb.rows) + "x" + std::to_string(lb.cols) + " vs " +
                               std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
}

}  // namespace hagnn

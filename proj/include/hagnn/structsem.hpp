#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "hagnn/metapath.hpp"

namespace hagnn {

enum class DeltaNorm {
  kPerTargetNeighborhood,  // softmax over each node's in-neighborhood (default)
  kGlobal,                 // softmax over the whole edge set
};

/// Normalized structural semantic weights; support equals the fused
/// graph's edge set, same entry order.
struct StructuralWeights {
  int node_type = 0;
  DeltaNorm mode = DeltaNorm::kPerTargetNeighborhood;
  // Parallel to fused.adjacency.entries; entry (u,v,w) gets weights[i].
  std::vector<double> weights;
};

/// Softmax of raw path counts over the chosen scope, max-subtracted for
/// stability. Per-target mode normalizes over each target node v's
/// in-edges (u,v).
inline StructuralWeights normalize_structural_weights(
    const FusedMetaPathGraph& fused, DeltaNorm mode = DeltaNorm::kPerTargetNeighborhood) {
  if (fused.adjacency.entries.empty())
    throw std::invalid_argument("normalize_structural_weights: empty fused graph");
  StructuralWeights sw;
  sw.node_type = fused.node_type;
  sw.mode = mode;
  const auto& entries = fused.adjacency.entries;
  sw.weights.resize(entries.size());

  if (mode == DeltaNorm::kGlobal) {
    int64_t mx = entries.front().weight;
    for (const auto& e : entries) mx = std::max(mx, e.weight);
    double denom = 0.0;
    for (const auto& e : entries) denom += std::exp(static_cast<double>(e.weight - mx));
    for (size_t i = 0; i < entries.size(); ++i)
      sw.weights[i] = std::exp(static_cast<double>(entries[i].weight - mx)) / denom;
    return sw;
  }

  // Per-target: group entry indices by col. Entries are sorted row-major,
  // so bucket explicitly.
  int64_t n = fused.adjacency.cols;
  std::vector<std::vector<size_t>> by_target(static_cast<size_t>(n));
  for (size_t i = 0; i < entries.size(); ++i)
    by_target[static_cast<size_t>(entries[i].col)].push_back(i);
  for (const auto& idx : by_target) {
    if (idx.empty()) continue;
    int64_t mx = entries[idx.front()].weight;
    for (size_t i : idx) mx = std::max(mx, entries[i].weight);
    double denom = 0.0;
    for (size_t i : idx) denom += std::exp(static_cast<double>(entries[i].weight - mx));
    for (size_t i : idx) sw.weights[i] = std::exp(static_cast<double>(entries[i].weight - mx)) / denom;
  }
  return sw;
}

inline void write_structural_weights(const FusedMetaPathGraph& fused, const StructuralWeights& sw,
                                     const HeterogeneousGraph& g,
                                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string type_name = g.node_types[static_cast<size_t>(fused.node_type)].name;
  std::ofstream out(out_dir / ("structweights_" + type_name + ".tsv"));
  char buf[64];
  for (size_t i = 0; i < fused.adjacency.entries.size(); ++i) {
    const auto& e = fused.adjacency.entries[i];
    std::snprintf(buf, sizeof buf, "%.12g", sw.weights[i]);
    out << e.row << '\t' << e.col << '\t' << e.weight << '\t' << buf << '\n';
  }
}

}  // namespace hagnn

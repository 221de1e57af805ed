#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hagnn {

/// Sparse matrix in sorted COO form. Weights are 64-bit integer counts:
/// meta-path construction multiplies adjacency chains, and integer counts
/// keep path-instance numbers exact.
struct SparseAdjacency {
  struct Entry {
    int64_t row = 0;
    int64_t col = 0;
    int64_t weight = 1;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<Entry> entries;  // sorted row-major, no duplicate (row,col)

  int64_t nnz() const { return static_cast<int64_t>(entries.size()); }

  friend bool operator==(const SparseAdjacency&, const SparseAdjacency&) = default;

  /// Builds a canonical matrix from possibly unsorted/duplicated input.
  /// Duplicate (row,col) pairs have their weights summed (multigraph input
  /// collapses to counts). Entries with weight 0 are dropped.
  static SparseAdjacency from_coo(int64_t rows, int64_t cols, std::vector<Entry> raw) {
    for (const Entry& e : raw) {
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
        throw std::out_of_range("sparse entry (" + std::to_string(e.row) + "," +
                                std::to_string(e.col) + ") outside " + std::to_string(rows) +
                                "x" + std::to_string(cols));
      }
      if (e.weight < 0) throw std::invalid_argument("negative edge weight");
    }
    std::sort(raw.begin(), raw.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseAdjacency out;
    out.rows = rows;
    out.cols = cols;
    out.entries.reserve(raw.size());
    for (const Entry& e : raw) {
      if (!out.entries.empty() && out.entries.back().row == e.row &&
          out.entries.back().col == e.col) {
        int64_t w = out.entries.back().weight;
        if (__builtin_add_overflow(w, e.weight, &w)) {
          throw std::overflow_error("edge weight overflow while deduplicating");
        }
        out.entries.back().weight = w;
      } else {
        out.entries.push_back(e);
      }
    }
    std::erase_if(out.entries, [](const Entry& e) { return e.weight == 0; });
    return out;
  }

  /// Row pointer array (CSR-style) over the sorted entries.
  std::vector<int64_t> row_ptr() const {
    std::vector<int64_t> ptr(static_cast<size_t>(rows) + 1, 0);
    for (const Entry& e : entries) ptr[static_cast<size_t>(e.row) + 1]++;
    for (int64_t i = 0; i < rows; ++i) ptr[static_cast<size_t>(i) + 1] += ptr[static_cast<size_t>(i)];
    return ptr;
  }
};

/// Transpose: (r,c,w) -> (c,r,w), shape swapped, output canonical.
inline SparseAdjacency reverse_adjacency(const SparseAdjacency& a) {
  std::vector<SparseAdjacency::Entry> flipped;
  flipped.reserve(a.entries.size());
  for (const auto& e : a.entries) flipped.push_back({e.col, e.row, e.weight});
  return SparseAdjacency::from_coo(a.cols, a.rows, std::move(flipped));
}

/// entries / rows, rounded to 2 decimals.
inline double average_degree(const SparseAdjacency& a) {
  if (a.rows == 0) throw std::invalid_argument("average_degree: empty node set");
  double d = static_cast<double>(a.nnz()) / static_cast<double>(a.rows);
  return std::round(d * 100.0) / 100.0;
}

/// Gustavson row-by-row sparse product with exact integer counts.
/// `nnz_budget` caps the output size; exceeding it aborts with an error
/// naming the hop (callers pass the meta-path step for the message).
inline SparseAdjacency spgemm(const SparseAdjacency& a, const SparseAdjacency& b,
                              int64_t nnz_budget = std::numeric_limits<int64_t>::max(),
                              const std::string& hop_name = "") {
  if (a.cols != b.rows) {
    throw std::invalid_argument("spgemm: inner dimensions differ (" + std::to_string(a.cols) +
                                " vs " + std::to_string(b.rows) + ")");
  }
  SparseAdjacency out;
  out.rows = a.rows;
  out.cols = b.cols;

  const auto a_ptr = a.row_ptr();
  const auto b_ptr = b.row_ptr();

  std::vector<int64_t> acc(static_cast<size_t>(b.cols), 0);
  std::vector<int64_t> touched;
  for (int64_t i = 0; i < a.rows; ++i) {
    touched.clear();
    for (int64_t ai = a_ptr[static_cast<size_t>(i)]; ai < a_ptr[static_cast<size_t>(i) + 1]; ++ai) {
      const auto& ea = a.entries[static_cast<size_t>(ai)];
      for (int64_t bi = b_ptr[static_cast<size_t>(ea.col)];
           bi < b_ptr[static_cast<size_t>(ea.col) + 1]; ++bi) {
        const auto& eb = b.entries[static_cast<size_t>(bi)];
        int64_t prod = 0;
        if (__builtin_mul_overflow(ea.weight, eb.weight, &prod)) {
          throw std::overflow_error("spgemm: path-instance count overflow");
        }
        int64_t& cell = acc[static_cast<size_t>(eb.col)];
        if (cell == 0 && prod != 0) touched.push_back(eb.col);
        if (__builtin_add_overflow(cell, prod, &cell)) {
          throw std::overflow_error("spgemm: path-instance count overflow");
        }
      }
    }
    if (static_cast<int64_t>(out.entries.size() + touched.size()) > nnz_budget) {
      throw std::runtime_error("densification limit exceeded" +
                               (hop_name.empty() ? std::string() : " at hop " + hop_name));
    }
    std::sort(touched.begin(), touched.end());
    for (int64_t c : touched) {
      if (acc[static_cast<size_t>(c)] != 0) {
        out.entries.push_back({i, c, acc[static_cast<size_t>(c)]});
      }
      acc[static_cast<size_t>(c)] = 0;
    }
  }
  return out;
}

}  // namespace hagnn

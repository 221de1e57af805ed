#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "hagnn/rng.hpp"

namespace hagnn {

struct F1Result {
  double macro = 0.0;
  double micro = 0.0;
};

/// Single-label multiclass F1. Macro: unweighted mean of per-class F1
/// (classes absent from both pred and truth count as 0). Micro: pooled,
/// which equals accuracy for single-label predictions.
inline F1Result f1_scores(const std::vector<int64_t>& pred, const std::vector<int64_t>& truth) {
  if (pred.empty() || pred.size() != truth.size())
    throw std::invalid_argument("f1_scores: empty or mismatched inputs");
  int64_t n_classes = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    n_classes = std::max({n_classes, pred[i] + 1, truth[i] + 1});
  std::vector<int64_t> tp(static_cast<size_t>(n_classes), 0), fp(static_cast<size_t>(n_classes), 0),
      fn(static_cast<size_t>(n_classes), 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) {
      tp[static_cast<size_t>(pred[i])]++;
    } else {
      fp[static_cast<size_t>(pred[i])]++;
      fn[static_cast<size_t>(truth[i])]++;
    }
  }
  F1Result r;
  int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (int64_t c = 0; c < n_classes; ++c) {
    int64_t denom = 2 * tp[static_cast<size_t>(c)] + fp[static_cast<size_t>(c)] + fn[static_cast<size_t>(c)];
    r.macro += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) / static_cast<double>(denom);
    tp_sum += tp[static_cast<size_t>(c)];
    fp_sum += fp[static_cast<size_t>(c)];
    fn_sum += fn[static_cast<size_t>(c)];
  }
  r.macro /= static_cast<double>(n_classes);
  r.micro = 2.0 * static_cast<double>(tp_sum) / static_cast<double>(2 * tp_sum + fp_sum + fn_sum);
  return r;
}

/// Multi-label F1 at a fixed 0.5 sigmoid threshold. `pred` and `truth`
/// are n x C multi-hot (pred already thresholded by the caller).
inline F1Result f1_scores_multilabel(const std::vector<std::vector<uint8_t>>& pred,
                                     const std::vector<std::vector<uint8_t>>& truth) {
  if (pred.empty() || pred.size() != truth.size())
    throw std::invalid_argument("f1_scores_multilabel: empty or mismatched inputs");
  size_t n_classes = pred.front().size();
  std::vector<int64_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  for (size_t i = 0; i < pred.size(); ++i)
    for (size_t c = 0; c < n_classes; ++c) {
      if (pred[i][c] && truth[i][c]) tp[c]++;
      else if (pred[i][c]) fp[c]++;
      else if (truth[i][c]) fn[c]++;
    }
  F1Result r;
  int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (size_t c = 0; c < n_classes; ++c) {
    int64_t denom = 2 * tp[c] + fp[c] + fn[c];
    r.macro += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    tp_sum += tp[c];
    fp_sum += fp[c];
    fn_sum += fn[c];
  }
  r.macro /= static_cast<double>(n_classes);
  int64_t denom = 2 * tp_sum + fp_sum + fn_sum;
  r.micro = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp_sum) / static_cast<double>(denom);
  return r;
}

/// Rank-based AUC: P(random positive outscores random negative), ties 1/2.
inline double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("roc_auc: empty or mismatched inputs");
  int64_t n_pos = 0, n_neg = 0;
  for (uint8_t y : labels) (y ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: single-class input");
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks over tie groups.
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double mid_rank = static_cast<double>(i + j + 1) / 2.0;  // ranks are 1-based
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]]) pos_rank_sum += mid_rank;
    i = j;
  }
  return (pos_rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// One ranking group: scored candidates with at least one positive.
struct RankGroup {
  std::vector<double> scores;
  std::vector<uint8_t> labels;
};

/// Mean reciprocal rank of the best-ranked positive per group. Ties are
/// pessimistic: a positive ranks after every equal-scored negative.
inline double mrr(const std::vector<RankGroup>& groups) {
  if (groups.empty()) throw std::invalid_argument("mrr: no groups");
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.scores.empty() || g.scores.size() != g.labels.size())
      throw std::invalid_argument("mrr: empty or mismatched group");
    int64_t best_rank = -1;
    for (size_t i = 0; i < g.scores.size(); ++i) {
      if (!g.labels[i]) continue;
      int64_t rank = 1;
      for (size_t j = 0; j < g.scores.size(); ++j) {
        if (j == i) continue;
        if (g.scores[j] > g.scores[i] || (g.scores[j] == g.scores[i] && !g.labels[j])) rank++;
      }
      if (best_rank < 0 || rank < best_rank) best_rank = rank;
    }
    if (best_rank < 0) throw std::invalid_argument("mrr: group without positives");
    total += 1.0 / static_cast<double>(best_rank);
  }
  return total / static_cast<double>(groups.size());
}

// ---------------------------------------------------------------------------
// k-means + clustering agreement scores
// ---------------------------------------------------------------------------

/// k-means with k-means++ seeding. Returns cluster assignment per row.
inline std::vector<int64_t> kmeans(const std::vector<std::vector<double>>& points, int64_t k,
                                   uint64_t seed, int restarts = 10, int max_iters = 300,
                                   double tol = 1e-6) {
  int64_t n = static_cast<int64_t>(points.size());
  if (k > n) throw std::invalid_argument("kmeans: k > n");
  size_t dim = points.front().size();

  std::vector<int64_t> best_assign;
  double best_inertia = std::numeric_limits<double>::infinity();

  auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t j = 0; j < dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
  };

  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed + static_cast<uint64_t>(r) * 0x9e3779b97f4a7c15ULL);
    // k-means++ seeding
    std::vector<std::vector<double>> centers;
    centers.push_back(points[static_cast<size_t>(rng.uniform_int(n))]);
    std::vector<double> d2(static_cast<size_t>(n));
    while (static_cast<int64_t>(centers.size()) < k) {
      double total = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) best = std::min(best, dist2(points[static_cast<size_t>(i)], c));
        d2[static_cast<size_t>(i)] = best;
        total += best;
      }
      if (total <= 0.0) {
        centers.push_back(points[static_cast<size_t>(rng.uniform_int(n))]);
        continue;
      }
      double pick = rng.uniform() * total;
      int64_t chosen = n - 1;
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        acc += d2[static_cast<size_t>(i)];
        if (acc >= pick) {
          chosen = i;
          break;
        }
      }
      centers.push_back(points[static_cast<size_t>(chosen)]);
    }

    std::vector<int64_t> assign(static_cast<size_t>(n), 0);
    double inertia = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      inertia = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int64_t bc = 0;
        for (int64_t c = 0; c < k; ++c) {
          double d = dist2(points[static_cast<size_t>(i)], centers[static_cast<size_t>(c)]);
          if (d < best) {
            best = d;
            bc = c;
          }
        }
        assign[static_cast<size_t>(i)] = bc;
        inertia += best;
      }
      std::vector<std::vector<double>> next(static_cast<size_t>(k), std::vector<double>(dim, 0.0));
      std::vector<int64_t> counts(static_cast<size_t>(k), 0);
      for (int64_t i = 0; i < n; ++i) {
        counts[static_cast<size_t>(assign[static_cast<size_t>(i)])]++;
        for (size_t j = 0; j < dim; ++j)
          next[static_cast<size_t>(assign[static_cast<size_t>(i)])][j] += points[static_cast<size_t>(i)][j];
      }
      double shift = 0.0;
      for (int64_t c = 0; c < k; ++c) {
        if (counts[static_cast<size_t>(c)] == 0) continue;  // empty cluster keeps its center
        for (size_t j = 0; j < dim; ++j) {
          next[static_cast<size_t>(c)][j] /= static_cast<double>(counts[static_cast<size_t>(c)]);
          shift += std::abs(next[static_cast<size_t>(c)][j] - centers[static_cast<size_t>(c)][j]);
        }
        centers[static_cast<size_t>(c)] = next[static_cast<size_t>(c)];
      }
      if (shift < tol) break;
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }
  return best_assign;
}

struct ClusterScores {
  double nmi = 0.0;
  double ari = 0.0;
};

/// NMI (arithmetic-mean normalization) and ARI from the contingency table.
inline ClusterScores cluster_agreement(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  if (a.empty() || a.size() != b.size())
    throw std::invalid_argument("cluster_agreement: empty or mismatched inputs");
  double n = static_cast<double>(a.size());
  std::map<int64_t, int64_t> ca, cb;
  std::map<std::pair<int64_t, int64_t>, int64_t> joint;
  for (size_t i = 0; i < a.size(); ++i) {
    ca[a[i]]++;
    cb[b[i]]++;
    joint[{a[i], b[i]}]++;
  }
  double mi = 0.0, ha = 0.0, hb = 0.0;
  for (const auto& [k, c] : ca) ha -= (c / n) * std::log(c / n);
  for (const auto& [k, c] : cb) hb -= (c / n) * std::log(c / n);
  for (const auto& [kk, c] : joint) {
    double pij = c / n;
    double pi = static_cast<double>(ca[kk.first]) / n;
    double pj = static_cast<double>(cb[kk.second]) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  ClusterScores s;
  double denom = 0.5 * (ha + hb);
  s.nmi = denom <= 0.0 ? 1.0 : mi / denom;

  auto comb2 = [](int64_t x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [kk, c] : joint) sum_ij += comb2(c);
  for (const auto& [k, c] : ca) sum_a += comb2(c);
  for (const auto& [k, c] : cb) sum_b += comb2(c);
  double total = comb2(static_cast<int64_t>(a.size()));
  double expected = sum_a * sum_b / total;
  double max_index = 0.5 * (sum_a + sum_b);
  s.ari = max_index == expected ? 1.0 : (sum_ij - expected) / (max_index - expected);
  return s;
}

/// k-means over embeddings, scored against true labels.
inline ClusterScores cluster_and_score(const std::vector<std::vector<double>>& embeddings,
                                       const std::vector<int64_t>& labels, int64_t k, uint64_t seed) {
  auto assign = kmeans(embeddings, k, seed);
  return cluster_agreement(assign, labels);
}

}  // namespace hagnn

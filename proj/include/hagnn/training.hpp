#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "hagnn/metrics.hpp"
#include "hagnn/model.hpp"
#include "hagnn/rng.hpp"

namespace hagnn {

enum class Task {
  kNodeClassificationSingle,
  kNodeClassificationMulti,
  kLinkPrediction,
};

struct TrainConfig {
  Task task = Task::kNodeClassificationSingle;
  double learning_rate = 5e-4;
  double weight_decay = 1e-4;
  int max_epochs = 300;
  int patience = 30;
  uint64_t seed = 0;
  ModelConfig model;
  // Link prediction only:
  int target_edge_type = -1;
  int negative_ratio = 1;
  double lp_train_frac = 0.85;
  double lp_val_frac = 0.05;  // remainder is the local test split
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  int64_t wall_ms = 0;
};

struct TrainResult {
  ModelParams best_params;   // best-validation checkpoint
  ModelParams final_params;  // state after the last epoch's update
  std::vector<EpochRecord> log;
  double best_val = 0.0;
  int best_epoch = -1;
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adam with L2 weight decay folded into the gradient.
class Adam {
 public:
  Adam(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelParams& params, const std::map<std::string, Tensor>& grads) {
    ++t_;
    for (auto& b : params.blocks) {
      auto& m = m_[b.name];
      auto& v = v_[b.name];
      if (m.empty()) {
        m.assign(b.values.size(), 0.0);
        v.assign(b.values.size(), 0.0);
      }
      const std::vector<double>& g = *grads.at(b.name).grad;
      double bc1 = 1.0 - std::pow(beta1_, t_);
      double bc2 = 1.0 - std::pow(beta2_, t_);
      for (size_t i = 0; i < b.values.size(); ++i) {
        double grad = g[i] + wd_ * b.values[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad * grad;
        b.values[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
    }
  }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// Link-prediction plumbing
// ---------------------------------------------------------------------------

struct EdgeSample {
  std::vector<std::pair<int64_t, int64_t>> edges;  // (src local, dst local)
  std::vector<uint8_t> labels;                     // 1 positive, 0 negative
};

/// Training negatives: uniform tail corruption avoiding true positives,
/// `ratio` per positive, deterministic under `seed`.
inline std::vector<std::pair<int64_t, int64_t>> sample_negatives(
    const HeterogeneousGraph& g, int target_edge_type,
    const std::vector<std::pair<int64_t, int64_t>>& positives, int ratio, uint64_t seed) {
  if (ratio < 1) throw std::invalid_argument("sample_negatives: ratio must be >= 1");
  const auto& et = g.edge_types[static_cast<size_t>(target_edge_type)];
  int64_t n_dst = g.node_types[static_cast<size_t>(et.dst_type)].count;
  std::unordered_set<int64_t> pos_keys;
  for (const auto& e : g.adjacency[static_cast<size_t>(target_edge_type)].entries)
    pos_keys.insert(e.row * n_dst + e.col);
  Rng rng(seed);
  std::vector<std::pair<int64_t, int64_t>> out;
  size_t wanted = positives.size() * static_cast<size_t>(ratio);
  size_t retries = 0;
  const size_t max_retries = 100 * wanted + 1000;
  for (const auto& [u, v] : positives) {
    for (int r = 0; r < ratio; ++r) {
      while (true) {
        if (retries++ > max_retries)
          throw std::runtime_error("sample_negatives: graph too dense to find negatives");
        int64_t cand = rng.uniform_int(n_dst);
        if (!pos_keys.count(u * n_dst + cand)) {
          out.push_back({u, cand});
          break;
        }
      }
    }
  }
  return out;
}

/// Evaluation negatives per the HGB convention: 2-hop-neighbor pairs of
/// the target relation's endpoint types that are not directly connected.
/// Returns up to `ratio` negatives per positive source node.
inline std::vector<std::pair<int64_t, int64_t>> sample_negatives_two_hop(
    const HeterogeneousGraph& g, int target_edge_type,
    const std::vector<std::pair<int64_t, int64_t>>& positives, int ratio, uint64_t seed) {
  const auto& et = g.edge_types[static_cast<size_t>(target_edge_type)];
  int64_t n_dst = g.node_types[static_cast<size_t>(et.dst_type)].count;
  const auto& adj = g.adjacency[static_cast<size_t>(target_edge_type)];
  auto ptr = adj.row_ptr();
  // u -> v' (direct) -> u' (shared dst) -> w: 2 hops in the bipartite
  // projection; candidates are dsts of sources sharing a dst with u.
  SparseAdjacency rev = reverse_adjacency(adj);
  auto rptr = rev.row_ptr();
  std::unordered_set<int64_t> pos_keys;
  for (const auto& e : adj.entries) pos_keys.insert(e.row * n_dst + e.col);
  Rng rng(seed);
  std::vector<std::pair<int64_t, int64_t>> out;
  for (const auto& [u, v_unused] : positives) {
    std::vector<int64_t> candidates;
    for (int64_t i = ptr[static_cast<size_t>(u)]; i < ptr[static_cast<size_t>(u) + 1]; ++i) {
      int64_t mid = adj.entries[static_cast<size_t>(i)].col;
      for (int64_t j = rptr[static_cast<size_t>(mid)]; j < rptr[static_cast<size_t>(mid) + 1]; ++j) {
        int64_t u2 = rev.entries[static_cast<size_t>(j)].col;
        for (int64_t k = ptr[static_cast<size_t>(u2)]; k < ptr[static_cast<size_t>(u2) + 1]; ++k) {
          int64_t w = adj.entries[static_cast<size_t>(k)].col;
          if (!pos_keys.count(u * n_dst + w)) candidates.push_back(w);
        }
      }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (int r = 0; r < ratio && !candidates.empty(); ++r) {
      size_t pick = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(candidates.size())));
      out.push_back({u, candidates[pick]});
      candidates.erase(candidates.begin() + static_cast<int64_t>(pick));
    }
  }
  return out;
}

/// prob(u, v) = sigmoid(z_u^T W z_v), plain-value variant for scoring.
inline double score_link(const std::vector<double>& z_u, const std::vector<double>& z_v,
                         const ParamBlock& w) {
  if (w.rows != w.cols || static_cast<size_t>(w.rows) != z_u.size() || z_u.size() != z_v.size())
    throw std::invalid_argument("score_link: shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < w.rows; ++i) {
    double row = 0.0;
    for (int64_t j = 0; j < w.cols; ++j)
      row += w.values[static_cast<size_t>(i * w.cols + j)] * z_v[static_cast<size_t>(j)];
    s += z_u[static_cast<size_t>(i)] * row;
  }
  return 1.0 / (1.0 + std::exp(-s));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int64_t> mask_indices(const std::vector<uint8_t>& mask) {
  std::vector<int64_t> out;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<int64_t>(i));
  return out;
}

/// Classification metric on the given rows from raw logits values.
inline double classification_macro_f1(const Tensor& logits, const DenseMatrix& labels,
                                      const std::vector<int64_t>& rows, bool multi_label) {
  if (rows.empty()) return 0.0;
  if (!multi_label) {
    std::vector<int64_t> pred, truth;
    for (int64_t i : rows) {
      int64_t best = 0;
      for (int64_t c = 1; c < logits.cols; ++c)
        if (logits.v(i, c) > logits.v(i, best)) best = c;
      int64_t tc = 0;
      for (int64_t c = 1; c < labels.cols; ++c)
        if (labels.at(i, c) > labels.at(i, tc)) tc = c;
      pred.push_back(best);
      truth.push_back(tc);
    }
    return f1_scores(pred, truth).macro;
  }
  std::vector<std::vector<uint8_t>> pred, truth;
  for (int64_t i : rows) {
    std::vector<uint8_t> p, t;
    for (int64_t c = 0; c < logits.cols; ++c) {
      p.push_back(logits.v(i, c) > 0.0 ? 1 : 0);  // sigmoid(x) > 0.5 iff x > 0
      t.push_back(labels.at(i, c) != 0.0 ? 1 : 0);
    }
    pred.push_back(std::move(p));
    truth.push_back(std::move(t));
  }
  return f1_scores_multilabel(pred, truth).macro;
}

}  // namespace detail

/// Everything train() needs beyond the graph: context, split edge sets
/// for link prediction.
struct TrainingData {
  EdgeSample lp_train, lp_val, lp_test;  // empty for classification tasks
};

/// Deterministic split of the target relation's edges plus negatives.
inline TrainingData prepare_link_prediction(const HeterogeneousGraph& g, const TrainConfig& cfg) {
  TrainingData data;
  if (cfg.target_edge_type < 0 ||
      cfg.target_edge_type >= static_cast<int>(g.edge_types.size()))
    throw std::invalid_argument("link prediction: invalid target edge type");
  std::vector<std::pair<int64_t, int64_t>> positives;
  for (const auto& e : g.adjacency[static_cast<size_t>(cfg.target_edge_type)].entries)
    positives.push_back({e.row, e.col});
  Rng rng(cfg.seed ^ 0x5bf03635dcd95d0dULL);
  for (size_t i = positives.size(); i > 1; --i)
    std::swap(positives[i - 1], positives[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i)))]);
  size_t n_train = static_cast<size_t>(static_cast<double>(positives.size()) * cfg.lp_train_frac);
  size_t n_val = static_cast<size_t>(static_cast<double>(positives.size()) * cfg.lp_val_frac);

  auto fill = [&](EdgeSample& s, size_t begin, size_t end,
                  std::vector<std::pair<int64_t, int64_t>> negs) {
    for (size_t i = begin; i < end; ++i) {
      s.edges.push_back(positives[i]);
      s.labels.push_back(1);
    }
    for (const auto& e : negs) {
      s.edges.push_back(e);
      s.labels.push_back(0);
    }
  };
  std::vector<std::pair<int64_t, int64_t>> train_pos(positives.begin(),
                                                     positives.begin() + static_cast<int64_t>(n_train));
  std::vector<std::pair<int64_t, int64_t>> val_pos(
      positives.begin() + static_cast<int64_t>(n_train),
      positives.begin() + static_cast<int64_t>(n_train + n_val));
  std::vector<std::pair<int64_t, int64_t>> test_pos(positives.begin() + static_cast<int64_t>(n_train + n_val),
                                                    positives.end());
  fill(data.lp_train, 0, n_train,
       sample_negatives(g, cfg.target_edge_type, train_pos, cfg.negative_ratio, cfg.seed + 1));
  fill(data.lp_val, n_train, n_train + n_val,
       sample_negatives_two_hop(g, cfg.target_edge_type, val_pos, cfg.negative_ratio, cfg.seed + 2));
  fill(data.lp_test, n_train + n_val, positives.size(),
       sample_negatives_two_hop(g, cfg.target_edge_type, test_pos, cfg.negative_ratio, cfg.seed + 3));
  return data;
}

/// Full-batch Adam training with best-validation early stopping. Throws
/// on NaN loss (divergence).
inline TrainResult train(const HeterogeneousGraph& g, const ModelContext& ctx, TrainConfig cfg,
                         const TrainingData* lp_data = nullptr) {
  int64_t d_out = cfg.model.output_dim();
  Rng rng(cfg.seed);
  ModelParams params = init_model_params(g, ctx, cfg.model, cfg.seed);
  const DenseMatrix& labels = g.labels[static_cast<size_t>(ctx.target_type)];
  const SplitMasks& splits = g.splits[static_cast<size_t>(ctx.target_type)];

  std::vector<int64_t> train_rows, val_rows;
  int64_t global_off = ctx.type_offset[static_cast<size_t>(ctx.target_type)];
  if (cfg.task != Task::kLinkPrediction) {
    if (labels.rows == 0) throw std::invalid_argument("train: target type has no labels");
    train_rows = detail::mask_indices(splits.train);
    val_rows = detail::mask_indices(splits.val);
    if (train_rows.empty()) throw std::invalid_argument("train: empty training mask");
    params.add("head.nc", d_out, labels.cols, rng);
  } else {
    if (lp_data == nullptr) throw std::invalid_argument("train: link prediction needs TrainingData");
    params.add("head.lp", d_out, d_out, rng);
  }

  const auto& et = cfg.task == Task::kLinkPrediction
                       ? g.edge_types[static_cast<size_t>(cfg.target_edge_type)]
                       : EdgeType{};

  Adam opt(cfg.learning_rate, cfg.weight_decay);
  TrainResult result;
  result.best_params = params;
  int since_best = 0;
  auto t0 = std::chrono::steady_clock::now();

  Tensor labels_t = Tensor::constant(labels.rows > 0 ? labels.rows : 1,
                                     labels.cols > 0 ? labels.cols : 1,
                                     labels.v.empty() ? std::vector<double>{0.0} : labels.v);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Tape tape;
    ForwardResult fw = model_forward(tape, ctx, params, cfg.model);
    Tensor loss;
    double val_metric = 0.0;

    if (cfg.task != Task::kLinkPrediction) {
      Tensor logits = ops::matmul(fw.z, fw.param_tensors.at("head.nc"));
      loss = cfg.task == Task::kNodeClassificationSingle
                 ? ops::masked_softmax_xent(logits, labels_t, train_rows)
                 : ops::masked_sigmoid_bce(logits, labels_t, train_rows);
      val_metric = detail::classification_macro_f1(logits, labels, val_rows,
                                                   cfg.task == Task::kNodeClassificationMulti);
    } else {
      std::vector<int64_t> src_rows, dst_rows;
      std::vector<double> targets;
      for (size_t i = 0; i < lp_data->lp_train.edges.size(); ++i) {
        auto [u, v] = lp_data->lp_train.edges[i];
        src_rows.push_back(ctx.type_offset[static_cast<size_t>(et.src_type)] + u);
        dst_rows.push_back(ctx.type_offset[static_cast<size_t>(et.dst_type)] + v);
        targets.push_back(lp_data->lp_train.labels[i]);
      }
      Tensor zu = ops::gather_rows(fw.z_all, src_rows);
      Tensor zv = ops::gather_rows(fw.z_all, dst_rows);
      Tensor scores =
          ops::sum_axis(ops::mul(ops::matmul(zu, fw.param_tensors.at("head.lp")), zv), 1);
      Tensor target_t = Tensor::constant(scores.rows, 1, targets);
      std::vector<int64_t> all(static_cast<size_t>(scores.rows));
      for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int64_t>(i);
      loss = ops::masked_sigmoid_bce(scores, target_t, all);

      // Validation ROC-AUC from the same forward pass.
      const ParamBlock wr{"", d_out, d_out, *fw.param_tensors.at("head.lp").val};
      std::vector<double> val_scores;
      for (auto [u, v] : lp_data->lp_val.edges) {
        int64_t gu = ctx.type_offset[static_cast<size_t>(et.src_type)] + u;
        int64_t gv = ctx.type_offset[static_cast<size_t>(et.dst_type)] + v;
        std::vector<double> zu_row(fw.z_all.val->begin() + gu * d_out,
                                   fw.z_all.val->begin() + (gu + 1) * d_out);
        std::vector<double> zv_row(fw.z_all.val->begin() + gv * d_out,
                                   fw.z_all.val->begin() + (gv + 1) * d_out);
        val_scores.push_back(score_link(zu_row, zv_row, wr));
      }
      val_metric = lp_data->lp_val.edges.empty() ? 0.0 : roc_auc(val_scores, lp_data->lp_val.labels);
    }

    double loss_val = (*loss.val)[0];
    if (!std::isfinite(loss_val))
      throw std::runtime_error("training diverged: loss is not finite at epoch " +
                               std::to_string(epoch));

    auto now = std::chrono::steady_clock::now();
    result.log.push_back(
        {epoch, loss_val, val_metric,
         std::chrono::duration_cast<std::chrono::milliseconds>(now - t0).count()});

    // Snapshot before the update: the metric was measured on these params.
    bool improved = result.best_epoch < 0 || val_metric > result.best_val;
    if (improved) {
      result.best_val = val_metric;
      result.best_epoch = epoch;
      result.best_params = params;
      since_best = 0;
    }

    tape.backward(loss);
    opt.step(params, fw.param_tensors);

    if (!improved && ++since_best >= cfg.patience) break;
  }
  result.final_params = params;
  (void)global_off;
  return result;
}

}  // namespace hagnn

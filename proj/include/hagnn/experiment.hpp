#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hagnn/config.hpp"
#include "hagnn/hetgraph.hpp"
#include "hagnn/metapath.hpp"
#include "hagnn/metrics.hpp"
#include "hagnn/model.hpp"
#include "hagnn/structsem.hpp"
#include "hagnn/training.hpp"

namespace hagnn {

/// Everything a command needs, resolved from one config: dataset,
/// catalog, fused graphs, structural weights, model context.
struct Experiment {
  Config cfg;
  LoadedDataset data;
  std::map<int, std::vector<MetaPath>> catalog;
  std::set<int> selected;
  std::map<int, std::vector<MetaPathGraph>> members;
  std::map<int, std::pair<FusedMetaPathGraph, StructuralWeights>> fused;
  ModelContext ctx;
  TrainConfig train_cfg;
  int target_type = 0;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    size_t b = tok.find_first_not_of(" \t");
    size_t e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline TrainConfig parse_train_config(const Config& cfg) {
  TrainConfig tc;
  std::string task = cfg.get_or("task", "nc_single");
  if (task == "nc_single")
    tc.task = Task::kNodeClassificationSingle;
  else if (task == "nc_multi")
    tc.task = Task::kNodeClassificationMulti;
  else if (task == "link_prediction")
    tc.task = Task::kLinkPrediction;
  else
    throw std::runtime_error("unknown task '" + task + "'");

  tc.learning_rate = cfg.get_double("train.lr", 5e-4);
  tc.weight_decay = cfg.get_double("train.weight_decay", 1e-4);
  tc.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", 300));
  tc.patience = static_cast<int>(cfg.get_int("train.patience", 30));
  tc.negative_ratio = static_cast<int>(cfg.get_int("train.negative_ratio", 1));
  tc.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));

  tc.model.hidden_dim = cfg.get_int("model.dim", 64);
  tc.model.heads = static_cast<int>(cfg.get_int("model.heads", 4));
  tc.model.layers_intra = static_cast<int>(cfg.get_int("model.layers_intra", 2));
  tc.model.layers_inter = static_cast<int>(cfg.get_int("model.layers_inter", 2));
  tc.model.beta = cfg.get_double("model.beta", 0.3);
  tc.model.leaky_slope = cfg.get_double("model.leaky_slope", 0.05);
  std::string combine = cfg.get_or("model.combine", "concat");
  if (combine == "concat")
    tc.model.combine = CombineMode::kConcat;
  else if (combine == "add")
    tc.model.combine = CombineMode::kAdd;
  else
    throw std::runtime_error("unknown combine mode '" + combine + "'");
  std::string act = cfg.get_or("model.activation", "elu");
  if (act == "elu")
    tc.model.intra_activation = Activation::kElu;
  else if (act == "relu")
    tc.model.intra_activation = Activation::kRelu;
  else if (act == "none")
    tc.model.intra_activation = Activation::kNone;
  else
    throw std::runtime_error("unknown activation '" + act + "'");
  tc.model.use_intra = cfg.get_bool("model.use_intra", true);
  tc.model.use_inter = cfg.get_bool("model.use_inter", true);
  if (tc.model.beta < 0.0 || tc.model.beta > 1.0)
    throw std::runtime_error("model.beta must lie in [0,1]");
  return tc;
}

inline Experiment load_experiment(const Config& cfg) {
  Experiment exp;
  exp.cfg = cfg;

  LoadOptions lo;
  lo.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  lo.onehot_cap = cfg.get_int("dataset.onehot_cap", 10000);
  lo.synth_dim = cfg.get_int("dataset.synth_dim", 64);
  lo.val_fraction = cfg.get_double("dataset.val_fraction", 0.2);
  exp.data = load_hgb_dataset(cfg.get("dataset.path"), lo);
  HeterogeneousGraph& g = exp.data.graph;

  if (cfg.has("dataset.type_names")) {
    auto names = detail::split_list(cfg.get("dataset.type_names"), ',');
    if (names.size() != g.node_types.size())
      throw std::runtime_error("dataset.type_names: expected " +
                               std::to_string(g.node_types.size()) + " names");
    for (size_t i = 0; i < names.size(); ++i) g.node_types[i].name = names[i];
  }

  auto report = validate_graph(g);
  if (!report.ok()) {
    std::string msg = "invalid dataset:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw std::runtime_error(msg);
  }

  // Meta-path catalog: either a standalone file or inline metapath.<TYPE> keys.
  if (cfg.has("metapath.catalog")) {
    exp.catalog = load_metapath_catalog(g, cfg.get("metapath.catalog"));
  } else {
    for (const auto& [key, value] : cfg.entries()) {
      if (key.rfind("metapath.", 0) != 0) continue;
      std::string type_name = key.substr(9);
      if (type_name == "nnz_budget" || type_name == "include_diagonal") continue;
      int t = g.find_node_type(type_name);
      if (t < 0) throw std::runtime_error("metapath key for unknown node type '" + type_name + "'");
      char sep = value.find(';') != std::string::npos || value.find("edges:") != std::string::npos
                     ? ';'
                     : ',';
      for (const auto& text : detail::split_list(value, sep))
        exp.catalog[t].push_back(resolve_metapath(g, text));
    }
  }

  double threshold = cfg.get_double("select.threshold", 0.01);
  exp.selected = select_types(g, threshold, exp.catalog);

  MetaPathOptions mp_opt;
  mp_opt.nnz_budget = cfg.get_int("metapath.nnz_budget", 1'500'000'000);
  mp_opt.include_diagonal = cfg.get_bool("metapath.include_diagonal", true);
  DeltaNorm mode = cfg.get_or("delta.mode", "per_target") == "global"
                       ? DeltaNorm::kGlobal
                       : DeltaNorm::kPerTargetNeighborhood;
  for (int t : exp.selected) {
    std::vector<MetaPathGraph> graphs;
    for (const auto& p : exp.catalog.at(t))
      if (p.closed(g) && p.head_type(g) == t) graphs.push_back(build_metapath_graph(g, p, mp_opt));
    FusedMetaPathGraph fg = fuse_metapath_graphs(graphs);
    StructuralWeights sw = normalize_structural_weights(fg, mode);
    exp.members[t] = std::move(graphs);
    exp.fused[t] = {std::move(fg), std::move(sw)};
  }

  exp.train_cfg = parse_train_config(cfg);
  exp.target_type = g.find_node_type(cfg.get("target.type"));
  if (exp.target_type < 0)
    throw std::runtime_error("unknown target.type '" + cfg.get("target.type") + "'");
  if (exp.train_cfg.task == Task::kLinkPrediction) {
    exp.train_cfg.target_edge_type = g.find_edge_type(cfg.get("target.edge_type"));
    if (exp.train_cfg.target_edge_type < 0)
      throw std::runtime_error("unknown target.edge_type '" + cfg.get("target.edge_type") + "'");
  }

  exp.ctx = build_model_context(g, exp.target_type, exp.selected, exp.fused);
  return exp;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// build-graphs: persists fused graphs, structural weight dumps, and the
/// reduction/redundancy report. Returns the report text.
inline std::string cmd_build_graphs(const Experiment& exp, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const HeterogeneousGraph& g = exp.data.graph;
  std::ostringstream report;
  report << "type\tmeta_paths\tsummed_member_edges\tfused_edges\treduction_rate\n";
  for (int t : exp.selected) {
    const auto& [fg, sw] = exp.fused.at(t);
    write_fused_graph(fg, g, out_dir);
    write_structural_weights(fg, sw, g, out_dir);
    ReductionStats stats = reduction_report(exp.members.at(t), fg);
    report << g.node_types[static_cast<size_t>(t)].name << '\t';
    for (size_t i = 0; i < fg.meta_paths.size(); ++i)
      report << (i ? "," : "") << fg.meta_paths[i].name;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", stats.reduction_rate * 100.0);
    report << '\t' << stats.summed_member_edges << '\t' << stats.fused_edges << '\t' << buf << '\n';
  }
  // Pairwise redundancy between member graphs of each type.
  report << "\npair\tjaccard\tcontainment\n";
  for (int t : exp.selected) {
    const auto& graphs = exp.members.at(t);
    for (size_t i = 0; i < graphs.size(); ++i)
      for (size_t j = i + 1; j < graphs.size(); ++j) {
        Redundancy r = information_redundancy(graphs[i], graphs[j]);
        char jb[32], cb[32];
        std::snprintf(jb, sizeof jb, "%.2f%%", r.jaccard * 100.0);
        std::snprintf(cb, sizeof cb, "%.2f%%", r.containment * 100.0);
        report << graphs[i].meta_path.name << "-" << graphs[j].meta_path.name << '\t' << jb << '\t'
               << cb << '\n';
      }
  }
  write_atomic(out_dir / "graph_stats.tsv", report.str());
  write_atomic(out_dir / "config.resolved", exp.cfg.canonical());
  exp.data.write_node_map(out_dir / "node_map.tsv");
  return report.str();
}

struct TrainArtifacts {
  TrainResult result;
  ModelParams final_params;  // best-validation checkpoint
  std::string test_report;
};

inline std::string format_train_log(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  for (const auto& r : log)
    out << r.epoch << '\t' << detail::format_double(r.train_loss) << '\t'
        << detail::format_double(r.val_metric) << '\n';
  return out.str();
}

/// Scores the held-out test split with the given parameters.
inline std::string evaluate_test(const Experiment& exp, const ModelParams& params,
                                 const TrainingData* lp_data) {
  const HeterogeneousGraph& g = exp.data.graph;
  const TrainConfig& tc = exp.train_cfg;
  Tape tape;
  ForwardResult fw = model_forward(tape, exp.ctx, params, tc.model);
  std::ostringstream out;
  if (tc.task != Task::kLinkPrediction) {
    const DenseMatrix& labels = g.labels[static_cast<size_t>(exp.target_type)];
    const SplitMasks& splits = g.splits[static_cast<size_t>(exp.target_type)];
    std::vector<int64_t> test_rows;
    for (size_t i = 0; i < splits.test.size(); ++i)
      if (splits.test[i]) test_rows.push_back(static_cast<int64_t>(i));
    if (test_rows.empty()) {
      out << "test\tno-test-split\n";
      return out.str();
    }
    Tensor logits = ops::matmul(fw.z, fw.param_tensors.at("head.nc"));
    bool multi = tc.task == Task::kNodeClassificationMulti;
    if (!multi) {
      std::vector<int64_t> pred, truth;
      for (int64_t i : test_rows) {
        int64_t best = 0, tcls = 0;
        for (int64_t c = 1; c < logits.cols; ++c)
          if (logits.v(i, c) > logits.v(i, best)) best = c;
        for (int64_t c = 1; c < labels.cols; ++c)
          if (labels.at(i, c) > labels.at(i, tcls)) tcls = c;
        pred.push_back(best);
        truth.push_back(tcls);
      }
      F1Result f1 = f1_scores(pred, truth);
      out << "macro_f1\t" << detail::format_double(f1.macro) << '\n';
      out << "micro_f1\t" << detail::format_double(f1.micro) << '\n';
    } else {
      std::vector<std::vector<uint8_t>> pred, truth;
      for (int64_t i : test_rows) {
        std::vector<uint8_t> p, t;
        for (int64_t c = 0; c < logits.cols; ++c) {
          p.push_back(logits.v(i, c) > 0.0 ? 1 : 0);
          t.push_back(labels.at(i, c) != 0.0 ? 1 : 0);
        }
        pred.push_back(std::move(p));
        truth.push_back(std::move(t));
      }
      F1Result f1 = f1_scores_multilabel(pred, truth);
      out << "macro_f1\t" << detail::format_double(f1.macro) << '\n';
      out << "micro_f1\t" << detail::format_double(f1.micro) << '\n';
    }
  } else {
    const auto& et = g.edge_types[static_cast<size_t>(tc.target_edge_type)];
    int64_t d_out = tc.model.output_dim();
    const ParamBlock& wr = params.at("head.lp");
    std::vector<double> scores;
    std::map<int64_t, RankGroup> groups;
    for (size_t i = 0; i < lp_data->lp_test.edges.size(); ++i) {
      auto [u, v] = lp_data->lp_test.edges[i];
      int64_t gu = exp.ctx.type_offset[static_cast<size_t>(et.src_type)] + u;
      int64_t gv = exp.ctx.type_offset[static_cast<size_t>(et.dst_type)] + v;
      std::vector<double> zu(fw.z_all.val->begin() + gu * d_out,
                             fw.z_all.val->begin() + (gu + 1) * d_out);
      std::vector<double> zv(fw.z_all.val->begin() + gv * d_out,
                             fw.z_all.val->begin() + (gv + 1) * d_out);
      double s = score_link(zu, zv, wr);
      scores.push_back(s);
      groups[u].scores.push_back(s);
      groups[u].labels.push_back(lp_data->lp_test.labels[i]);
    }
    out << "roc_auc\t"
        << detail::format_double(roc_auc(scores, lp_data->lp_test.labels)) << '\n';
    std::vector<RankGroup> grouped;
    for (auto& [u, grp] : groups) {
      bool has_pos = false, has_neg = false;
      for (uint8_t l : grp.labels) (l ? has_pos : has_neg) = true;
      if (has_pos && has_neg) grouped.push_back(std::move(grp));
    }
    if (!grouped.empty()) out << "mrr\t" << detail::format_double(mrr(grouped)) << '\n';
  }
  return out.str();
}

/// train: full run, writes checkpoint, train.log, timing sidecar, and
/// test metrics into out_dir.
inline TrainArtifacts cmd_train(const Experiment& exp, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TrainArtifacts art;
  TrainingData lp_data;
  const TrainingData* lp_ptr = nullptr;
  if (exp.train_cfg.task == Task::kLinkPrediction) {
    lp_data = prepare_link_prediction(exp.data.graph, exp.train_cfg);
    lp_ptr = &lp_data;
  }
  art.result = train(exp.data.graph, exp.ctx, exp.train_cfg, lp_ptr);
  art.final_params = art.result.best_params;
  save_checkpoint(art.final_params, exp.cfg.hash(), out_dir / "checkpoint.ckpt");
  write_atomic(out_dir / "train.log", format_train_log(art.result.log));
  {
    std::ostringstream timing;
    for (const auto& r : art.result.log) timing << r.epoch << '\t' << r.wall_ms << '\n';
    write_atomic(out_dir / "train.timing.log", timing.str());
  }
  art.test_report = evaluate_test(exp, art.final_params, lp_ptr);
  write_atomic(out_dir / "test_metrics.tsv", art.test_report);
  write_atomic(out_dir / "config.resolved", exp.cfg.canonical());
  return art;
}

/// Checks checkpoint/config compatibility and returns the parameters.
inline ModelParams load_checkpoint_for(const Experiment& exp, const std::filesystem::path& path) {
  ModelParams loaded = load_checkpoint(path);
  ModelParams expected = init_model_params(exp.data.graph, exp.ctx, exp.train_cfg.model, 0);
  {
    // Reconstruct the head block shapes the training run appended.
    Rng rng(0);
    int64_t d_out = exp.train_cfg.model.output_dim();
    if (exp.train_cfg.task != Task::kLinkPrediction) {
      const DenseMatrix& labels = exp.data.graph.labels[static_cast<size_t>(exp.target_type)];
      expected.add("head.nc", d_out, labels.cols, rng);
    } else {
      expected.add("head.lp", d_out, d_out, rng);
    }
  }
  check_shapes(loaded, expected);
  return loaded;
}

/// embed: target-type embeddings as `node_id<TAB>float,...` (local ids).
inline std::string cmd_embed(const Experiment& exp, const ModelParams& params) {
  Tape tape;
  ForwardResult fw = model_forward(tape, exp.ctx, params, exp.train_cfg.model);
  std::ostringstream out;
  char buf[64];
  for (int64_t i = 0; i < fw.z.rows; ++i) {
    out << i << '\t';
    for (int64_t j = 0; j < fw.z.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", fw.z.v(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

/// cluster: k-means on the labeled target nodes' embeddings, NMI + ARI.
inline std::string cmd_cluster(const Experiment& exp, const ModelParams& params) {
  const HeterogeneousGraph& g = exp.data.graph;
  const DenseMatrix& labels = g.labels[static_cast<size_t>(exp.target_type)];
  if (labels.rows == 0) throw std::runtime_error("cluster: target type has no labels");
  Tape tape;
  ForwardResult fw = model_forward(tape, exp.ctx, params, exp.train_cfg.model);
  std::vector<std::vector<double>> emb;
  std::vector<int64_t> truth;
  for (int64_t i = 0; i < labels.rows; ++i) {
    int64_t cls = -1;
    for (int64_t c = 0; c < labels.cols; ++c)
      if (labels.at(i, c) != 0.0) {
        cls = c;
        break;
      }
    if (cls < 0) continue;
    truth.push_back(cls);
    emb.push_back(std::vector<double>(fw.z.val->begin() + i * fw.z.cols,
                                      fw.z.val->begin() + (i + 1) * fw.z.cols));
  }
  ClusterScores s =
      cluster_and_score(emb, truth, labels.cols, static_cast<uint64_t>(exp.cfg.get_int("seed", 0)));
  std::ostringstream out;
  out << "nmi\t" << detail::format_double(s.nmi) << '\n';
  out << "ari\t" << detail::format_double(s.ari) << '\n';
  return out.str();
}

/// sweep-beta: sequential training runs at each beta, one metric row per
/// value.
inline std::string cmd_sweep_beta(const Experiment& base, const std::vector<double>& values,
                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ostringstream table;
  table << "beta\tbest_val_metric\ttest_report\n";
  for (double beta : values) {
    Experiment exp = base;
    exp.train_cfg.model.beta = beta;
    char bb[32];
    std::snprintf(bb, sizeof bb, "%.3g", beta);
    exp.cfg.set("model.beta", bb);
    TrainArtifacts art = cmd_train(exp, out_dir / ("beta_" + std::string(bb)));
    std::string report = art.test_report;
    for (char& c : report)
      if (c == '\n') c = ' ';
    table << bb << '\t' << detail::format_double(art.result.best_val) << '\t' << report << '\n';
  }
  write_atomic(out_dir / "beta_sweep.tsv", table.str());
  return table.str();
}

}  // namespace hagnn

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hagnn/experiment.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;  // key=value
  bool json_output = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", args.out_dir, "Output directory (default: output.dir or ./out)");
  cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set model.beta=0.5");
  cmd->add_flag("--json", args.json_output, "Machine-readable JSON on stdout");
}

hagnn::Config resolve_config(const CommonArgs& args) {
  hagnn::Config cfg = hagnn::Config::from_file(args.config_path);
  for (const std::string& ov : args.overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set", "expected key=value, got '" + ov + "'");
    cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  return cfg;
}

std::filesystem::path resolve_out(const CommonArgs& args, const hagnn::Config& cfg) {
  if (!args.out_dir.empty()) return args.out_dir;
  return cfg.get_or("output.dir", "out");
}

json tsv_to_json(const std::string& tsv) {
  // Key-value reports (two columns) become an object; anything wider
  // becomes a list of rows.
  json rows = json::array();
  bool all_pairs = true;
  std::istringstream in(tsv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row = json::array();
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) row.push_back(cell);
    if (row.size() != 2) all_pairs = false;
    rows.push_back(std::move(row));
  }
  if (all_pairs) {
    json obj = json::object();
    for (const auto& row : rows) obj[row[0].get<std::string>()] = row[1];
    return obj;
  }
  return rows;
}

void emit(const CommonArgs& args, const std::string& text, const char* json_key) {
  if (args.json_output) {
    json out;
    out[json_key] = tsv_to_json(text);
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << text;
  }
}

/// Numeric blowups get exit code 3; everything else data-shaped is 2.
bool is_numeric_failure(const std::string& msg) {
  return msg.find("diverged") != std::string::npos ||
         msg.find("overflow") != std::string::npos ||
         msg.find("densification limit") != std::string::npos ||
         msg.find("non-finite") != std::string::npos;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hagnn: hybrid-aggregation heterogeneous graph learning"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checkpoint_path;
  std::string beta_list = "0,0.1,0.3,0.5,0.7,0.9,1";

  CLI::App* c_build = app.add_subcommand("build-graphs", "Construct fused graphs and weights");
  add_common(c_build, args);

  CLI::App* c_train = app.add_subcommand("train", "Train a model end to end");
  add_common(c_train, args);

  CLI::App* c_eval = app.add_subcommand("eval", "Score a checkpoint on the test split");
  add_common(c_eval, args);
  c_eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

  CLI::App* c_embed = app.add_subcommand("embed", "Write target-node embeddings");
  add_common(c_embed, args);
  c_embed->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

  CLI::App* c_cluster = app.add_subcommand("cluster", "K-means + NMI/ARI on embeddings");
  add_common(c_cluster, args);
  c_cluster->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

  CLI::App* c_sweep = app.add_subcommand("sweep-beta", "Train across edge-residual strengths");
  add_common(c_sweep, args);
  c_sweep->add_option("--betas", beta_list, "Comma-separated beta values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    hagnn::Config cfg = resolve_config(args);
    hagnn::Experiment exp = hagnn::load_experiment(cfg);
    std::filesystem::path out_dir = resolve_out(args, cfg);

    if (c_build->parsed()) {
      emit(args, hagnn::cmd_build_graphs(exp, out_dir), "graphs");
    } else if (c_train->parsed()) {
      hagnn::TrainArtifacts art = hagnn::cmd_train(exp, out_dir);
      if (args.json_output) {
        json out;
        out["best_epoch"] = art.result.best_epoch;
        out["best_val_metric"] = art.result.best_val;
        out["epochs_run"] = art.result.log.size();
        out["test"] = tsv_to_json(art.test_report);
        out["checkpoint"] = (out_dir / "checkpoint.ckpt").string();
        std::cout << out.dump(2) << '\n';
      } else {
        std::cout << "best epoch " << art.result.best_epoch << ", best val metric "
                  << art.result.best_val << '\n'
                  << art.test_report;
      }
    } else if (c_eval->parsed()) {
      hagnn::ModelParams params = hagnn::load_checkpoint_for(exp, checkpoint_path);
      hagnn::TrainingData lp_data;
      const hagnn::TrainingData* lp_ptr = nullptr;
      if (exp.train_cfg.task == hagnn::Task::kLinkPrediction) {
        lp_data = hagnn::prepare_link_prediction(exp.data.graph, exp.train_cfg);
        lp_ptr = &lp_data;
      }
      emit(args, hagnn::evaluate_test(exp, params, lp_ptr), "test");
    } else if (c_embed->parsed()) {
      hagnn::ModelParams params = hagnn::load_checkpoint_for(exp, checkpoint_path);
      std::string emb = hagnn::cmd_embed(exp, params);
      std::filesystem::create_directories(out_dir);
      hagnn::write_atomic(out_dir / "embeddings.tsv", emb);
      if (args.json_output) {
        json out;
        out["embeddings"] = (out_dir / "embeddings.tsv").string();
        std::cout << out.dump(2) << '\n';
      } else {
        std::cout << "wrote " << (out_dir / "embeddings.tsv").string() << '\n';
      }
    } else if (c_cluster->parsed()) {
      hagnn::ModelParams params = hagnn::load_checkpoint_for(exp, checkpoint_path);
      emit(args, hagnn::cmd_cluster(exp, params), "cluster");
    } else if (c_sweep->parsed()) {
      std::vector<double> betas;
      for (const auto& tok : hagnn::detail::split_list(beta_list, ','))
        betas.push_back(std::stod(tok));
      if (betas.empty()) throw CLI::ValidationError("--betas", "no values given");
      emit(args, hagnn::cmd_sweep_beta(exp, betas, out_dir), "sweep");
    }
    return 0;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numeric_failure(e.what()) ? 3 : 2;
  }
}

// Command-line front end: dataset generation, the two training phases,
// evaluation, reconstruction export, and metric-table merging. Exit
// codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgae/commands.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> label_fraction;
  bool force = false;
  bool no_gcn = false;
  bool no_skip = false;
  bool shape_loss_only = false;
  bool box_loss_only = false;
  bool no_pretrain = false;
  std::vector<std::string> report_files;
};

void add_config_options(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (default 1, for determinism)");
}

void add_ablation_flags(CLI::App* cmd, CliArgs& args) {
  cmd->add_flag("--no-gcn", args.no_gcn, "disable message passing");
  cmd->add_flag("--no-skip", args.no_skip,
                "decoder input is the class distributions only");
  cmd->add_flag("--shape-loss-only", args.shape_loss_only,
                "reconstruction loss keeps only the shape-code term");
  cmd->add_flag("--box-loss-only", args.box_loss_only,
                "reconstruction loss keeps only the box terms");
}

/// Config file < environment (output dir, threads) < explicit flags.
sgae::ExperimentConfig resolve_config(const CliArgs& args,
                                      std::vector<std::string>& env_applied) {
  sgae::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = sgae::load_config(args.config_path);
  env_applied = sgae::apply_env_overrides(cfg);
  if (args.seed) cfg.seed = *args.seed;
  if (args.threads) cfg.threads = *args.threads;
  if (args.label_fraction) cfg.label_fraction = *args.label_fraction;
  cfg.ablation.no_gcn = cfg.ablation.no_gcn || args.no_gcn;
  cfg.ablation.no_skip = cfg.ablation.no_skip || args.no_skip;
  cfg.ablation.shape_loss_only =
      cfg.ablation.shape_loss_only || args.shape_loss_only;
  cfg.ablation.box_loss_only =
      cfg.ablation.box_loss_only || args.box_loss_only;
  cfg.ablation.no_pretrain = cfg.ablation.no_pretrain || args.no_pretrain;
  return cfg;
}

int dispatch(const std::string& command, const CliArgs& args) {
  if (command == "report") {
    sgae::cmd_report(args.report_files, std::cout);
    return 0;
  }

  std::vector<std::string> env_applied;
  const auto cfg = resolve_config(args, env_applied);

  if (command == "gen-data") {
    sgae::cmd_gen_data(cfg, args.force, env_applied);
  } else if (command == "pretrain") {
    auto result = sgae::cmd_pretrain(cfg, env_applied);
    std::cout << "pretrain: " << result.epochs_run
              << " epochs, held-out loss " << result.initial_heldout
              << " -> " << result.final_heldout << '\n';
  } else if (command == "finetune") {
    auto result = sgae::cmd_finetune(cfg, args.checkpoint, env_applied);
    std::cout << "finetune: " << result.epochs_run
              << " epochs, held-out loss " << result.initial_heldout
              << " -> " << result.final_heldout << '\n';
  } else if (command == "eval") {
    auto metrics = sgae::cmd_eval(cfg, args.checkpoint, env_applied);
    sgae::write_metric_report(std::cout, metrics);
  } else if (command == "reconstruct") {
    auto report = sgae::cmd_reconstruct(cfg, args.checkpoint, env_applied);
    if (auto acc = report.overall())
      std::cout << "reconstruct: preservation " << *acc << " over "
                << report.checked_sum << " relations\n";
    else
      std::cout << "reconstruct: no rule-checkable relations\n";
  } else {
    throw sgae::ConfigError("unknown command '" + command + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene graph autoencoder pipeline"};
  app.require_subcommand(1);
  CliArgs args;

  auto* gen = app.add_subcommand("gen-data",
                                 "generate a scene corpus and its manifest");
  add_config_options(gen, args);
  gen->add_flag("--force", args.force,
                "allow writing into a non-empty directory");

  auto* pre = app.add_subcommand("pretrain",
                                 "pre-train the autoencoder (no labels)");
  add_config_options(pre, args);
  add_ablation_flags(pre, args);

  auto* fine = app.add_subcommand(
      "finetune", "fine-tune the encoder for scene graph prediction");
  add_config_options(fine, args);
  add_ablation_flags(fine, args);
  fine->add_option("--checkpoint", args.checkpoint,
                   "pre-trained checkpoint to start from");
  fine->add_flag("--no-pretrain", args.no_pretrain,
                 "train from random weights (from-scratch baseline)");
  fine->add_option("--label-fraction", args.label_fraction,
                   "labeled fraction of the training split, in (0, 1]");

  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_config_options(eval_cmd, args);
  eval_cmd->add_option("--checkpoint", args.checkpoint,
                       "checkpoint to evaluate");

  auto* recon = app.add_subcommand(
      "reconstruct", "decode the test split and score relation preservation");
  add_config_options(recon, args);
  recon->add_option("--checkpoint", args.checkpoint,
                    "pretrain checkpoint to decode with");

  auto* report = app.add_subcommand(
      "report", "merge metric files into one aligned table");
  report->add_option("files", args.report_files, "metric files to merge")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return dispatch(app.get_subcommands().front()->get_name(), args);
  } catch (const sgae::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const sgae::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const sgae::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

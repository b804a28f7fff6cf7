#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "daf/commands.hpp"
#include "daf/errors.hpp"

int main(int argc, char** argv) {
  torch::set_num_threads(1);

  CLI::App app{"dafnet: dual-branch infrared/visible image fusion toolkit"};
  app.require_subcommand(1);

  std::string out, data, config, checkpoint, fused;
  uint64_t seed = 0;
  int n_pairs = 20;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic registered IR/VIS dataset");
  synth->add_option("--out", out, "Output root (ir/ and vis/ are created)")->required();
  synth->add_option("--n-pairs", n_pairs, "Number of pairs")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Generator seed");

  std::optional<uint64_t> train_seed;
  bool quiet = false;
  auto add_train = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", config, "Config file ([model] [loss] [kernel] [train])");
    cmd->add_option("--data", data, "Dataset root with ir/ and vis/")->required();
    cmd->add_option("--out", out, "Output directory for checkpoints and history")->required();
    cmd->add_option("--seed", train_seed, "Override train.seed");
    cmd->add_flag("--quiet", quiet, "Only report the final checkpoint");
    return cmd;
  };
  auto* train1 = add_train("train-stage1", "Train encoders and decoder (reconstruction + domain adaptation)");
  train1->add_option("--checkpoint", checkpoint, "Resume from a stage-1 checkpoint");
  auto* train2 = add_train("train-stage2", "Train fusion layers on top of a stage-1 checkpoint");
  train2->add_option("--checkpoint", checkpoint, "Stage-1 checkpoint")->required();

  auto* fuse = app.add_subcommand("fuse", "Fuse every pair of a dataset");
  fuse->add_option("--checkpoint", checkpoint, "Stage-2 checkpoint")->required();
  fuse->add_option("--data", data, "Dataset root with ir/ and vis/")->required();
  fuse->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Score fused images with the metric battery");
  eval->add_option("--data", data, "Dataset root with ir/ and vis/")->required();
  eval->add_option("--fused", fused, "Directory of fused images (default: <data>/fused)");
  eval->add_option("--out", out, "Metric CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      daf::cli::synth(out, n_pairs, seed);
      std::cout << "wrote " << n_pairs << " pairs to " << out << '\n';
    } else if (train1->parsed() || train2->parsed()) {
      daf::cli::TrainOptions options;
      if (!config.empty()) options.config = config;
      options.data = data;
      options.out = out;
      if (!checkpoint.empty()) options.checkpoint = checkpoint;
      options.seed = train_seed;
      options.quiet = quiet;
      const auto path = daf::cli::train(train1->parsed() ? 1 : 2, options);
      std::cout << "final checkpoint: " << path.string() << '\n';
    } else if (fuse->parsed()) {
      daf::cli::fuse(checkpoint, data, out);
      std::cout << "fused images written to " << out << '\n';
    } else if (eval->parsed()) {
      const auto fused_dir = fused.empty() ? std::filesystem::path(data) / "fused" : std::filesystem::path(fused);
      const auto table = daf::cli::eval(data, fused_dir, out);
      std::cout << daf::metrics::format_table(table);
    }
  } catch (const daf::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

#pragma once

// The operations behind the dafnet subcommands. Errors surface as exceptions;
// tools/dafnet maps ValidationError to exit code 1 and anything else to 2.

#include <cstdint>
#include <filesystem>
#include <optional>

#include "daf/metrics.hpp"

namespace daf::cli {

namespace fs = std::filesystem;

void synth(const fs::path& out_dir, int n_pairs, uint64_t seed);

struct TrainOptions {
  std::optional<fs::path> config;      // defaults when absent
  fs::path data;                       // root with ir/ and vis/
  fs::path out;                        // checkpoints + history CSV
  std::optional<fs::path> checkpoint;  // stage 1: resume; stage 2: the stage-1 checkpoint (required)
  std::optional<uint64_t> seed;        // overrides train.seed
  bool quiet = false;
};

/// Runs one training stage; returns the path of the final checkpoint
/// (<out>/stage<N>_final.ckpt). Also writes <out>/stage<N>_history.csv and
/// <out>/stage<N>_epochNNN.ckpt every train.checkpoint_every epochs.
fs::path train(int stage, const TrainOptions& options);

/// Fuses every pair under `data` with a stage-2 checkpoint, writing
/// <id>_fused.png (RGB, visible chroma) and <id>_fused_y.png (luminance).
void fuse(const fs::path& checkpoint, const fs::path& data, const fs::path& out_dir);

/// Scores <fused_dir>/<id>_fused_y.png against the sources under `data`,
/// writes the CSV and returns the table.
metrics::EvaluationTable eval(const fs::path& data, const fs::path& fused_dir, const fs::path& out_csv);

}  // namespace daf::cli

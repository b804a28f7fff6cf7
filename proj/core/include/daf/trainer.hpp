#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daf/checkpoint.hpp"
#include "daf/config.hpp"
#include "daf/io.hpp"
#include "daf/model.hpp"

namespace daf::train {

/// lr0 * 0.5^floor(epoch / lr_halve_every).
double lr_at(int64_t epoch, const TrainConfig& config);

struct PatchBatch {
  torch::Tensor ir;       // (B, 1, P, P)
  torch::Tensor vis_rgb;  // (B, 3, P, P)
  std::vector<size_t> indices;
  std::vector<std::array<int64_t, 2>> offsets;  // (row, col) of each crop
};

/// Throws ValidationError naming the first pair smaller than `patch` in either dimension.
void check_patchable(std::span<const io::ImagePair> data, int64_t patch);

/// Crops the pairs at `indices` with one uniformly drawn window per pair,
/// applied identically to both modalities.
PatchBatch sample_patch_batch(std::span<const io::ImagePair> data, std::span<const size_t> indices, int64_t patch,
                              std::mt19937_64& rng);

struct HistoryRow {
  int64_t iteration = 0;
  int64_t epoch = 0;
  double lr = 0.0;
  std::vector<double> values;  // aligned with LossHistory::columns
};

struct LossHistory {
  std::vector<std::string> columns;  // loss components, then "total" and "grad_norm"
  std::vector<HistoryRow> rows;

  std::vector<double> column(const std::string& name) const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainHooks {
  std::function<void(const Checkpoint&)> on_epoch_end;
  std::function<void(const HistoryRow&, const LossHistory&)> on_iteration;
};

struct TrainResult {
  Checkpoint checkpoint;
  LossHistory history;
  model::DafNet model{nullptr};
};

/// Stage I: encoders and decoder trained on reconstruction + correlation +
/// MK-MMD + InfoNCE. Starts fresh, or continues from `resume` (a stage-1 checkpoint).
TrainResult train_stage1(std::span<const io::ImagePair> data, const Config& config, const TrainHooks& hooks = {},
                         const Checkpoint* resume = nullptr);

/// Stage II: fusion layers trained and decoder fine-tuned on the fusion loss,
/// starting from a stage-1 checkpoint. Encoders stay frozen unless
/// train.stage2_freeze_encoders is false.
TrainResult train_stage2(std::span<const io::ImagePair> data, const Checkpoint& stage1, const Config& config,
                         const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

/// FNV-1a over the raw bytes of the given tensors, for freeze checks.
uint64_t parameter_hash(const std::vector<torch::Tensor>& params);

}  // namespace daf::train

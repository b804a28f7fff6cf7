#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "daf/config.hpp"
#include "daf/model.hpp"

namespace daf {

/// Everything needed to resume training or run inference: a versioned binary
/// container holding model parameters, optimizer state, the RNG stream, the
/// stage tag and a snapshot of the configuration.
struct Checkpoint {
  static constexpr uint32_t kFormatVersion = 1;

  int64_t stage = 1;
  int64_t epoch = 0;      // completed epochs
  int64_t iteration = 0;  // completed optimizer steps
  Config config;
  std::string rng_state;
  std::string model_state;      // torch archive bytes
  std::string optimizer_state;  // torch archive bytes, may be empty
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_module(torch::nn::Module& module);
void deserialize_module(torch::nn::Module& module, const std::string& bytes);

/// Rebuilds the network described by the checkpoint's config and loads its parameters.
model::DafNet restore_model(const Checkpoint& checkpoint);

}  // namespace daf

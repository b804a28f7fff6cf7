#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace daf {

struct ModelConfig {
  int64_t embed_dim = 64;
  int64_t num_heads = 8;
  int64_t shared_blocks = 1;
  int64_t base_blocks = 3;
  int64_t detail_blocks = 3;
  int64_t decoder_blocks = 2;
  double ffn_expansion = 2.0;

  void validate() const;
};

enum class CorrMode {
  kLiteral,     // C(Y^B_V, Y^B_I) + C(Y^D_V, Y^D_I)
  kDecomposed,  // C(Y^D_V, Y^D_I) - C(Y^B_V, Y^B_I)
};

struct LossWeights {
  double alpha1 = 5.0;
  double alpha2 = 5.0;
  double beta1 = 2.0;
  double beta2 = 1.0;
  double beta3 = 0.1;
  double gamma1 = 10.0;
  double gamma2 = 2.0;
  double temperature = 0.1;
  double ssim_c1 = 0.01 * 0.01;
  double ssim_c2 = 0.03 * 0.03;
  CorrMode corr_mode = CorrMode::kLiteral;

  void validate() const;
};

/// Configuration-level description of the hybrid kernel. Gaussian bandwidths
/// are not stored here; they are resolved per batch by the median heuristic.
struct KernelConfig {
  int64_t gauss_k = 5;
  std::vector<double> lap_gammas{0.1, 1.0, 5.0};
  double mix_c1 = 0.5;
  int64_t n_positions = 256;

  void validate() const;
};

struct TrainConfig {
  int64_t patch_size = 128;
  int64_t batch_size = 4;
  int64_t epochs = 40;
  double lr0 = 1e-4;
  int64_t lr_halve_every = 10;
  int64_t stage = 1;
  uint64_t seed = 0;
  bool stage2_freeze_encoders = true;
  double grad_clip = 1.0;  // global-norm clip; <= 0 disables
  int64_t checkpoint_every = 5;
  int64_t max_iterations = 0;  // 0: run all epochs

  void validate() const;
};

struct Config {
  ModelConfig model;
  LossWeights loss;
  KernelConfig kernel;
  TrainConfig train;

  void validate() const;
};

/// Parses the sectioned key-value format ([model] [loss] [kernel] [train]).
/// Keys not listed in the defaults are rejected with a ConfigError naming them.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const Config& config);

std::string_view to_string(CorrMode mode);

}  // namespace daf

#pragma once

// Hybrid Gaussian + Laplacian multi-kernel and the empirical MK-MMD distance
// between infrared and visible feature distributions.

#include <random>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "daf/config.hpp"

namespace daf::mmd {

/// Fully resolved hybrid kernel
///   k_H = c1 * sum_j alpha_j exp(-|a-b|^2 / (2 tau_j^2)) + c2 * sum_j beta_j exp(-|a-b| / tau_j).
struct KernelSpec {
  std::vector<double> gauss_bandwidths;
  std::vector<double> gauss_weights;
  std::vector<double> lap_bandwidths;
  std::vector<double> lap_weights;
  double c1 = 0.5;
  double c2 = 0.5;

  /// Weights sum to one (each within 1e-6), bandwidths strictly positive.
  void validate() const;

  /// Uniform weights over the given Gaussian bandwidths and Laplacian gammas.
  static KernelSpec uniform(std::vector<double> gauss_bandwidths, std::span<const double> lap_gammas, double c1);
};

/// tau = 1 / sqrt(2 gamma).
double laplacian_bandwidth(double gamma);

double gaussian_multikernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);
double laplacian_multikernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);
double hybrid_kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);

/// Pairwise Euclidean distances of (n, d) and (m, d) rows. Exact differences
/// are used (no Gram-matrix expansion) so that d(x, x) is exactly zero.
torch::Tensor pairwise_distances(const torch::Tensor& x, const torch::Tensor& y);

/// Differentiable Gram matrices (n, m) of the component and hybrid kernels.
torch::Tensor gaussian_gram(const torch::Tensor& x, const torch::Tensor& y, const KernelSpec& spec);
torch::Tensor laplacian_gram(const torch::Tensor& x, const torch::Tensor& y, const KernelSpec& spec);
torch::Tensor hybrid_gram(const torch::Tensor& x, const torch::Tensor& y, const KernelSpec& spec);

/// Median-heuristic Gaussian bandwidths m * 2^(j-3) for j = 1..k, where m is
/// the median pairwise distance over the pooled rows (at most `max_pairs`
/// subsampled pairs). Falls back to m = 1 when the median is zero.
std::vector<double> median_heuristic_bandwidths(const torch::Tensor& pooled, int64_t k, std::mt19937_64& rng,
                                                int64_t max_pairs = 1000);
std::vector<double> median_heuristic_bandwidths(const torch::Tensor& x, const torch::Tensor& y, int64_t k,
                                                std::mt19937_64& rng, int64_t max_pairs = 1000);

/// Biased (V-statistic) MK-MMD estimate between the rows of `ir` (n, d) and
/// `vis` (m, d). Differentiable; evaluated in double precision and returned in
/// the dtype of `ir`.
torch::Tensor mk_mmd(const torch::Tensor& ir, const torch::Tensor& vis, const KernelSpec& spec);

/// mk_mmd as a plain number, clamped at zero for reporting.
double mk_mmd_value(const torch::Tensor& ir, const torch::Tensor& vis, const KernelSpec& spec);

/// Draws `n_positions` distinct flat spatial indices out of h * w (all of them,
/// in order, when h * w <= n_positions).
torch::Tensor sample_positions(int64_t h, int64_t w, int64_t n_positions, std::mt19937_64& rng);

/// Gathers the channel vectors at `positions` from a (B, C, H, W) map into a
/// (B * P, C) sample set.
torch::Tensor gather_channel_vectors(const torch::Tensor& features, const torch::Tensor& positions);

/// Mean MK-MMD over the adaptation taps with a fixed kernel. Each tap uses
/// freshly drawn positions shared by both modalities.
torch::Tensor mmd_from_feature_maps(std::span<const torch::Tensor> taps_ir, std::span<const torch::Tensor> taps_vis,
                                    const KernelSpec& spec, int64_t n_positions, std::mt19937_64& rng);

/// As above, but the Gaussian bandwidths are re-derived per tap with the median
/// heuristic (treated as constants for gradients) and the remaining kernel
/// parameters come from `config`.
torch::Tensor mmd_from_feature_maps(std::span<const torch::Tensor> taps_ir, std::span<const torch::Tensor> taps_vis,
                                    const KernelConfig& config, std::mt19937_64& rng);

}  // namespace daf::mmd

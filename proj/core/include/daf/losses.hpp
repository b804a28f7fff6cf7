#pragma once

#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "daf/config.hpp"
#include "daf/model.hpp"

namespace daf::loss {

/// Differentiable total plus every named component, in insertion order.
struct LossReport {
  torch::Tensor total;
  std::vector<std::pair<std::string, torch::Tensor>> terms;

  void add(std::string name, torch::Tensor value) { terms.emplace_back(std::move(name), std::move(value)); }
  double value(const std::string& name) const;
  /// Detached numbers for logging, including "total".
  std::map<std::string, double> values() const;
  std::vector<std::string> names() const;
};

torch::Tensor mse_loss(const torch::Tensor& x, const torch::Tensor& x_hat);

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5, valid region).
/// Inputs are single-channel batches (B, 1, H, W) on the [0, 1] scale.
torch::Tensor ssim_index(const torch::Tensor& x, const torch::Tensor& y, double c1 = 1e-4, double c2 = 9e-4);

/// Sobel gradient magnitude sqrt(Gx^2 + Gy^2 + 1e-8) with reflect padding.
torch::Tensor sobel_magnitude(const torch::Tensor& x);

/// Mean L1 distance between Sobel magnitudes.
torch::Tensor gradient_loss(const torch::Tensor& x, const torch::Tensor& x_hat);

/// mse + alpha1 * ssim + alpha2 * grad, each component summed over the two
/// modalities; ssim is 2 - (SSIM(V, V^) + SSIM(I, I^)).
LossReport recon_loss(const torch::Tensor& ir, const torch::Tensor& ir_hat, const torch::Tensor& vis,
                      const torch::Tensor& vis_hat, const LossWeights& w);

struct Correlation {
  torch::Tensor value;
  bool degenerate = false;  // a zero-variance input; value is then 0
};

/// Pearson correlation over all flattened entries.
Correlation correlation_coefficient(const torch::Tensor& a, const torch::Tensor& b);

/// literal:    C(Y^B_V, Y^B_I) + C(Y^D_V, Y^D_I)
/// decomposed: C(Y^D_V, Y^D_I) - C(Y^B_V, Y^B_I)
torch::Tensor corr_loss(const torch::Tensor& base_vis, const torch::Tensor& base_ir, const torch::Tensor& detail_vis,
                        const torch::Tensor& detail_ir, CorrMode mode = CorrMode::kLiteral);

/// InfoNCE with dot-product similarity; row i of x pairs with row i of y.
torch::Tensor infonce_loss(const torch::Tensor& x, const torch::Tensor& y, double temperature);

/// MK-MMD over the adaptation taps; delegates to mmd::mmd_from_feature_maps.
torch::Tensor mkmmd_loss(std::span<const torch::Tensor> taps_ir, std::span<const torch::Tensor> taps_vis,
                         const KernelConfig& kernel, std::mt19937_64& rng);

/// recon + beta1 * corr + beta2 * mkmmd + beta3 * infonce. The InfoNCE
/// embeddings are the global-average-pooled base features.
LossReport stage1_loss(const torch::Tensor& ir, const torch::Tensor& vis_lum, const model::Reconstruction& rec,
                       const LossWeights& w, const KernelConfig& kernel, std::mt19937_64& rng);

/// Mean |max(vis, ir) - fused|.
torch::Tensor intensity_loss(const torch::Tensor& vis_lum, const torch::Tensor& ir, const torch::Tensor& fused);

/// Mean |max(|grad vis|, |grad ir|) - |grad fused||.
torch::Tensor max_gradient_loss(const torch::Tensor& vis_lum, const torch::Tensor& ir, const torch::Tensor& fused);

/// intensity + gamma1 * max_grad + gamma2 * corr.
LossReport stage2_loss(const torch::Tensor& vis_lum, const torch::Tensor& ir, const torch::Tensor& fused,
                       const model::EncodedFeatures& ir_features, const model::EncodedFeatures& vis_features,
                       const LossWeights& w);

}  // namespace daf::loss

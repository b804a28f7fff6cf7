#pragma once

// Building blocks of the fusion network. Every block is resolution preserving:
// (B, C, H, W) in, (B, C', H, W) out.

#include <torch/torch.h>

namespace daf::model {

/// Per-pixel layer normalization over the channel axis, with affine weight and bias.
struct ChannelLayerNormImpl : torch::nn::Module {
  explicit ChannelLayerNormImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;
};
TORCH_MODULE(ChannelLayerNorm);

/// Multi-head attention across channels ("transposed" attention): the attention
/// map is (C/heads x C/heads) per head, so cost is linear in H*W.
struct TransposedAttentionImpl : torch::nn::Module {
  TransposedAttentionImpl(int64_t channels, int64_t heads);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t heads;
  torch::Tensor temperature;
  torch::nn::Conv2d qkv{nullptr};
  torch::nn::Conv2d qkv_dw{nullptr};
  torch::nn::Conv2d project_out{nullptr};
};
TORCH_MODULE(TransposedAttention);

/// Gated depthwise feed-forward: GELU(a) * b where (a, b) come from a
/// 1x1 expansion followed by a depthwise 3x3 convolution.
struct GatedFeedForwardImpl : torch::nn::Module {
  GatedFeedForwardImpl(int64_t channels, double expansion);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d project_in{nullptr};
  torch::nn::Conv2d dwconv{nullptr};
  torch::nn::Conv2d project_out{nullptr};
};
TORCH_MODULE(GatedFeedForward);

/// Pre-norm transformer block: x + Attn(LN(x)), then x + FFN(LN(x)).
struct RestormerBlockImpl : torch::nn::Module {
  RestormerBlockImpl(int64_t channels, int64_t heads, double ffn_expansion);
  torch::Tensor forward(const torch::Tensor& x);

  ChannelLayerNorm norm1{nullptr};
  TransposedAttention attn{nullptr};
  ChannelLayerNorm norm2{nullptr};
  GatedFeedForward ffn{nullptr};
};
TORCH_MODULE(RestormerBlock);

/// 1x1 expand -> GELU -> depthwise 3x3 (reflect) -> GELU -> 1x1. Emits
/// 2 * out_channels maps read as (log-scale, shift). The last layer starts at zero.
struct CouplingSubnetImpl : torch::nn::Module {
  CouplingSubnetImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d expand{nullptr};
  torch::nn::Conv2d dwconv{nullptr};
  torch::nn::Conv2d project{nullptr};
};
TORCH_MODULE(CouplingSubnet);

/// Two-sided affine coupling on a channel split (x1 | x2):
///   y1 = x1 * exp(clamp(s_a(x2))) + t_a(x2)
///   y2 = x2 * exp(clamp(s_b(y1))) + t_b(y1)
/// clamp is the soft bound 2*tanh(s/2), keeping log-scales inside (-2, 2).
struct AffineCouplingImpl : torch::nn::Module {
  explicit AffineCouplingImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor inverse(const torch::Tensor& y);

  int64_t half;
  CouplingSubnet first{nullptr};
  CouplingSubnet second{nullptr};
};
TORCH_MODULE(AffineCoupling);

/// Soft clamp applied to coupling log-scales.
torch::Tensor clamp_log_scale(const torch::Tensor& s);

}  // namespace daf::model

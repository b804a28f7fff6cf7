#include "daf/blocks.hpp"

#include "daf/errors.hpp"

namespace daf::model {
namespace {

namespace F = torch::nn::functional;

torch::nn::Conv2d pointwise(int64_t in, int64_t out, bool bias = false) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).bias(bias));
}

torch::nn::Conv2d depthwise(int64_t channels, torch::nn::detail::conv_padding_mode_t mode = torch::kZeros) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(channels, channels, 3).padding(1).groups(channels).bias(false).padding_mode(mode));
}

constexpr double kLogScaleBound = 2.0;

}  // namespace

ChannelLayerNormImpl::ChannelLayerNormImpl(int64_t channels)
    : weight(register_parameter("weight", torch::ones({1, channels, 1, 1}))),
      bias(register_parameter("bias", torch::zeros({1, channels, 1, 1}))) {}

torch::Tensor ChannelLayerNormImpl::forward(const torch::Tensor& x) {
  const auto mean = x.mean(1, /*keepdim=*/true);
  const auto var = (x - mean).pow(2).mean(1, /*keepdim=*/true);
  return (x - mean) / torch::sqrt(var + 1e-5) * weight + bias;
}

TransposedAttentionImpl::TransposedAttentionImpl(int64_t channels, int64_t heads_)
    : heads(heads_),
      temperature(register_parameter("temperature", torch::ones({heads_, 1, 1}))),
      qkv(register_module("qkv", pointwise(channels, channels * 3))),
      qkv_dw(register_module("qkv_dw", depthwise(channels * 3))),
      project_out(register_module("project_out", pointwise(channels, channels))) {
  if (channels % heads_ != 0) throw ConfigError("attention channels must be divisible by heads");
}

torch::Tensor TransposedAttentionImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const auto qkv_maps = qkv_dw(qkv(x)).chunk(3, 1);
  auto split_heads = [&](const torch::Tensor& t) { return t.reshape({b, heads, c / heads, h * w}); };
  const auto norm = F::NormalizeFuncOptions().dim(-1);
  const auto q = F::normalize(split_heads(qkv_maps[0]), norm);
  const auto k = F::normalize(split_heads(qkv_maps[1]), norm);
  const auto v = split_heads(qkv_maps[2]);
  const auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) * temperature, -1);
  return project_out(torch::matmul(attn, v).reshape({b, c, h, w}));
}

GatedFeedForwardImpl::GatedFeedForwardImpl(int64_t channels, double expansion) {
  const auto hidden = std::max<int64_t>(1, static_cast<int64_t>(static_cast<double>(channels) * expansion));
  project_in = register_module("project_in", pointwise(channels, hidden * 2));
  dwconv = register_module("dwconv", depthwise(hidden * 2));
  project_out = register_module("project_out", pointwise(hidden, channels));
}

torch::Tensor GatedFeedForwardImpl::forward(const torch::Tensor& x) {
  const auto parts = dwconv(project_in(x)).chunk(2, 1);
  return project_out(torch::gelu(parts[0]) * parts[1]);
}

RestormerBlockImpl::RestormerBlockImpl(int64_t channels, int64_t heads, double ffn_expansion)
    : norm1(register_module("norm1", ChannelLayerNorm(channels))),
      attn(register_module("attn", TransposedAttention(channels, heads))),
      norm2(register_module("norm2", ChannelLayerNorm(channels))),
      ffn(register_module("ffn", GatedFeedForward(channels, ffn_expansion))) {}

torch::Tensor RestormerBlockImpl::forward(const torch::Tensor& x) {
  auto y = x + attn(norm1(x));
  return y + ffn(norm2(y));
}

CouplingSubnetImpl::CouplingSubnetImpl(int64_t in_channels, int64_t out_channels) {
  const auto hidden = in_channels * 2;
  expand = register_module("expand", pointwise(in_channels, hidden));
  dwconv = register_module("dwconv", depthwise(hidden, torch::kReflect));
  project = register_module("project", pointwise(hidden, out_channels * 2, /*bias=*/true));
  torch::NoGradGuard no_grad;
  project->weight.zero_();
  project->bias.zero_();
}

torch::Tensor CouplingSubnetImpl::forward(const torch::Tensor& x) {
  return project(torch::gelu(dwconv(torch::gelu(expand(x)))));
}

torch::Tensor clamp_log_scale(const torch::Tensor& s) {
  return kLogScaleBound * torch::tanh(s / kLogScaleBound);
}

AffineCouplingImpl::AffineCouplingImpl(int64_t channels) : half(channels / 2) {
  if (channels % 2 != 0) throw ConfigError("affine coupling needs an even channel count");
  first = register_module("first", CouplingSubnet(half, half));
  second = register_module("second", CouplingSubnet(half, half));
}

torch::Tensor AffineCouplingImpl::forward(const torch::Tensor& x) {
  const auto x1 = x.narrow(1, 0, half);
  const auto x2 = x.narrow(1, half, half);
  const auto st_a = first(x2).chunk(2, 1);
  const auto y1 = x1 * torch::exp(clamp_log_scale(st_a[0])) + st_a[1];
  const auto st_b = second(y1).chunk(2, 1);
  const auto y2 = x2 * torch::exp(clamp_log_scale(st_b[0])) + st_b[1];
  return torch::cat({y1, y2}, 1);
}

torch::Tensor AffineCouplingImpl::inverse(const torch::Tensor& y) {
  const auto y1 = y.narrow(1, 0, half);
  const auto y2 = y.narrow(1, half, half);
  const auto st_b = second(y1).chunk(2, 1);
  const auto x2 = (y2 - st_b[1]) * torch::exp(-clamp_log_scale(st_b[0]));
  const auto st_a = first(x2).chunk(2, 1);
  const auto x1 = (y1 - st_a[1]) * torch::exp(-clamp_log_scale(st_a[0]));
  return torch::cat({x1, x2}, 1);
}

}  // namespace daf::model

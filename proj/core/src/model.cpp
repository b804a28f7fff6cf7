#include "daf/model.hpp"

#include <string>

#include "daf/errors.hpp"

namespace daf::model {
namespace {

torch::nn::Conv2d pointwise(int64_t in, int64_t out, bool bias = false) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).bias(bias));
}

torch::nn::Sequential restormer_stack(const ModelConfig& config, int64_t count) {
  torch::nn::Sequential seq;
  for (int64_t i = 0; i < count; ++i) {
    seq->push_back(RestormerBlock(config.embed_dim, config.num_heads, config.ffn_expansion));
  }
  return seq;
}

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                         c10::str(b.sizes()));
  }
}

void check_feature(const torch::Tensor& t, int64_t channels, const char* what) {
  if (t.dim() != 4 || t.size(1) != channels) {
    throw DimensionError(std::string(what) + ": expected (B, " + std::to_string(channels) + ", H, W), got " +
                         c10::str(t.sizes()));
  }
}

void append(std::vector<torch::Tensor>& out, const torch::nn::Module& m) {
  for (const auto& p : m.parameters()) out.push_back(p);
}

}  // namespace

void check_image_batch(const torch::Tensor& images, const char* what) {
  if (images.dim() != 4 || (images.size(1) != 1 && images.size(1) != 3)) {
    throw DimensionError(std::string(what) + ": expected (B, 1|3, H, W), got " + c10::str(images.sizes()));
  }
  if (images.size(2) % 8 != 0 || images.size(3) % 8 != 0 || images.size(2) == 0 || images.size(3) == 0) {
    throw DimensionError(std::string(what) + ": height and width must be positive multiples of 8, got " +
                         c10::str(images.sizes()));
  }
  torch::NoGradGuard no_grad;
  if (!torch::isfinite(images).all().item<bool>()) {
    throw ValidationError(std::string(what) + ": contains non-finite values");
  }
  if (images.min().item<double>() < 0.0 || images.max().item<double>() > 1.0) {
    throw ValidationError(std::string(what) + ": values must lie in [0, 1]");
  }
}

torch::Tensor to_luminance(const torch::Tensor& images) {
  if (images.size(1) == 1) return images;
  return 0.299 * images.narrow(1, 0, 1) + 0.587 * images.narrow(1, 1, 1) + 0.114 * images.narrow(1, 2, 1);
}

SharedEncoderImpl::SharedEncoderImpl(const ModelConfig& config)
    : embed(register_module("embed", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, config.embed_dim, 3)
                                                           .padding(1)
                                                           .bias(false)))),
      blocks(register_module("blocks", restormer_stack(config, config.shared_blocks))) {}

torch::Tensor SharedEncoderImpl::forward(const torch::Tensor& luminance) { return blocks->forward(embed(luminance)); }

BaseEncoderImpl::BaseEncoderImpl(const ModelConfig& config) : blocks(register_module("blocks", torch::nn::ModuleList())) {
  for (int64_t i = 0; i < config.base_blocks; ++i) {
    blocks->push_back(RestormerBlock(config.embed_dim, config.num_heads, config.ffn_expansion));
  }
}

BaseFeatures BaseEncoderImpl::forward(const torch::Tensor& shared) {
  std::vector<torch::Tensor> outputs;
  auto x = shared;
  for (const auto& block : *blocks) {
    x = block->as<RestormerBlock>()->forward(x);
    outputs.push_back(x);
  }
  BaseFeatures features;
  features.output = x;
  features.taps.assign(outputs.end() - 3, outputs.end());
  return features;
}

DetailEncoderImpl::DetailEncoderImpl(const ModelConfig& config) {
  if (config.embed_dim % 2 != 0) throw ConfigError("model.embed_dim must be even for the detail encoder");
  for (int64_t i = 0; i < config.detail_blocks; ++i) {
    blocks.push_back(register_module("block" + std::to_string(i), AffineCoupling(config.embed_dim)));
  }
}

torch::Tensor DetailEncoderImpl::forward(const torch::Tensor& shared) {
  auto x = shared;
  for (auto& block : blocks) x = block->forward(x);
  return x;
}

torch::Tensor DetailEncoderImpl::forward_block(const torch::Tensor& x, int64_t index) {
  if (index < 0 || index >= num_blocks()) {
    throw std::out_of_range("detail block index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(num_blocks()) + ")");
  }
  return blocks[static_cast<size_t>(index)]->forward(x);
}

torch::Tensor DetailEncoderImpl::invert_block(const torch::Tensor& y, int64_t index) {
  if (index < 0 || index >= num_blocks()) {
    throw std::out_of_range("detail block index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(num_blocks()) + ")");
  }
  return blocks[static_cast<size_t>(index)]->inverse(y);
}

BaseFusionImpl::BaseFusionImpl(const ModelConfig& config)
    : block(register_module("block", RestormerBlock(config.embed_dim * 2, config.num_heads, config.ffn_expansion))),
      project(register_module("project", pointwise(config.embed_dim * 2, config.embed_dim))) {}

torch::Tensor BaseFusionImpl::forward(const torch::Tensor& ir, const torch::Tensor& vis) {
  return project(block(torch::cat({ir, vis}, 1)));
}

DetailFusionImpl::DetailFusionImpl(const ModelConfig& config)
    : block(register_module("block", AffineCoupling(config.embed_dim * 2))),
      project(register_module("project", pointwise(config.embed_dim * 2, config.embed_dim))) {}

torch::Tensor DetailFusionImpl::forward(const torch::Tensor& ir, const torch::Tensor& vis) {
  return project(block(torch::cat({ir, vis}, 1)));
}

DecoderImpl::DecoderImpl(const ModelConfig& config)
    : reduce(register_module("reduce", pointwise(config.embed_dim * 2, config.embed_dim))),
      blocks(register_module("blocks", restormer_stack(config, config.decoder_blocks))),
      head(register_module("head", pointwise(config.embed_dim, 1, /*bias=*/true))) {}

torch::Tensor DecoderImpl::forward(const torch::Tensor& base, const torch::Tensor& detail) {
  return torch::sigmoid(head(blocks->forward(reduce(torch::cat({base, detail}, 1)))));
}

DafNetImpl::DafNetImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  shared = register_module("shared", SharedEncoder(config_));
  base = register_module("base", BaseEncoder(config_));
  detail = register_module("detail", DetailEncoder(config_));
  base_fusion = register_module("base_fusion", BaseFusion(config_));
  detail_fusion = register_module("detail_fusion", DetailFusion(config_));
  decoder = register_module("decoder", Decoder(config_));
}

torch::Tensor DafNetImpl::encode_shared(const torch::Tensor& images) {
  check_image_batch(images);
  return shared(to_luminance(images));
}

BaseFeatures DafNetImpl::encode_base(const torch::Tensor& features) {
  check_feature(features, config_.embed_dim, "encode_base");
  return base(features);
}

torch::Tensor DafNetImpl::encode_detail(const torch::Tensor& features) {
  check_feature(features, config_.embed_dim, "encode_detail");
  return detail(features);
}

torch::Tensor DafNetImpl::invert_detail_block(const torch::Tensor& output, int64_t block_index) {
  check_feature(output, config_.embed_dim, "invert_detail_block");
  return detail->invert_block(output, block_index);
}

torch::Tensor DafNetImpl::fuse_base(const torch::Tensor& ir, const torch::Tensor& vis) {
  check_same_shape(ir, vis, "fuse_base");
  check_feature(ir, config_.embed_dim, "fuse_base");
  return base_fusion(ir, vis);
}

torch::Tensor DafNetImpl::fuse_detail(const torch::Tensor& ir, const torch::Tensor& vis) {
  check_same_shape(ir, vis, "fuse_detail");
  check_feature(ir, config_.embed_dim, "fuse_detail");
  return detail_fusion(ir, vis);
}

torch::Tensor DafNetImpl::decode(const torch::Tensor& base_features, const torch::Tensor& detail_features) {
  check_same_shape(base_features, detail_features, "decode");
  check_feature(base_features, config_.embed_dim, "decode");
  return decoder(base_features, detail_features);
}

EncodedFeatures DafNetImpl::encode(const torch::Tensor& images) {
  EncodedFeatures f;
  f.shared = encode_shared(images);
  auto b = base(f.shared);
  f.base = b.output;
  f.base_taps = std::move(b.taps);
  f.detail = detail(f.shared);
  return f;
}

Reconstruction DafNetImpl::forward_reconstruct(const torch::Tensor& ir, const torch::Tensor& vis) {
  check_image_batch(ir, "infrared batch");
  check_image_batch(vis, "visible batch");
  if (ir.size(0) != vis.size(0) || ir.size(2) != vis.size(2) || ir.size(3) != vis.size(3)) {
    throw DimensionError("infrared/visible batches are not registered: " + c10::str(ir.sizes()) + " vs " +
                         c10::str(vis.sizes()));
  }
  Reconstruction r;
  r.ir = encode(ir);
  r.vis = encode(vis);
  r.ir_hat = decoder(r.ir.base, r.ir.detail);
  r.vis_hat = decoder(r.vis.base, r.vis.detail);
  return r;
}

FusionOutput DafNetImpl::forward_fuse_detailed(const torch::Tensor& ir, const torch::Tensor& vis) {
  check_image_batch(ir, "infrared batch");
  check_image_batch(vis, "visible batch");
  if (ir.size(0) != vis.size(0) || ir.size(2) != vis.size(2) || ir.size(3) != vis.size(3)) {
    throw DimensionError("infrared/visible batches are not registered: " + c10::str(ir.sizes()) + " vs " +
                         c10::str(vis.sizes()));
  }
  FusionOutput out;
  out.ir = encode(ir);
  out.vis = encode(vis);
  out.fused_base = base_fusion(out.ir.base, out.vis.base);
  out.fused_detail = detail_fusion(out.ir.detail, out.vis.detail);
  out.fused = decoder(out.fused_base, out.fused_detail);
  return out;
}

torch::Tensor DafNetImpl::forward_fuse(const torch::Tensor& ir, const torch::Tensor& vis) {
  return forward_fuse_detailed(ir, vis).fused;
}

std::vector<torch::Tensor> DafNetImpl::encoder_parameters() const {
  std::vector<torch::Tensor> out;
  append(out, *shared);
  append(out, *base);
  append(out, *detail);
  return out;
}

std::vector<torch::Tensor> DafNetImpl::fusion_parameters() const {
  std::vector<torch::Tensor> out;
  append(out, *base_fusion);
  append(out, *detail_fusion);
  return out;
}

std::vector<torch::Tensor> DafNetImpl::decoder_parameters() const {
  std::vector<torch::Tensor> out;
  append(out, *decoder);
  return out;
}

DafNet make_model(const ModelConfig& config, uint64_t seed) {
  torch::manual_seed(seed);
  return DafNet(config);
}

}  // namespace daf::model

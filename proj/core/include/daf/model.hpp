#pragma once

#include <vector>

#include <torch/torch.h>

#include "daf/blocks.hpp"
#include "daf/config.hpp"

namespace daf::model {

/// Checks the image-batch contract: (B, 1|3, H, W), H and W divisible by 8,
/// finite values in [0, 1]. Throws DimensionError / ValidationError.
void check_image_batch(const torch::Tensor& images, const char* what = "image batch");

/// BT.601 luma of a (B, 3, H, W) batch; (B, 1, H, W) input is returned as is.
torch::Tensor to_luminance(const torch::Tensor& images);

/// Patch embedding (3x3 conv) followed by transformer blocks.
struct SharedEncoderImpl : torch::nn::Module {
  explicit SharedEncoderImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& luminance);

  torch::nn::Conv2d embed{nullptr};
  torch::nn::Sequential blocks{nullptr};
};
TORCH_MODULE(SharedEncoder);

struct BaseFeatures {
  torch::Tensor output;
  /// Outputs of the last three blocks, in order; taps.back() is output.
  std::vector<torch::Tensor> taps;
};

/// Global-structure branch: a stack of transformer blocks.
struct BaseEncoderImpl : torch::nn::Module {
  explicit BaseEncoderImpl(const ModelConfig& config);
  BaseFeatures forward(const torch::Tensor& shared);

  torch::nn::ModuleList blocks{nullptr};
};
TORCH_MODULE(BaseEncoder);

/// Texture branch: a chain of affine coupling blocks, each invertible.
struct DetailEncoderImpl : torch::nn::Module {
  explicit DetailEncoderImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& shared);
  torch::Tensor forward_block(const torch::Tensor& x, int64_t index);
  torch::Tensor invert_block(const torch::Tensor& y, int64_t index);
  int64_t num_blocks() const { return static_cast<int64_t>(blocks.size()); }

  std::vector<AffineCoupling> blocks;
};
TORCH_MODULE(DetailEncoder);

/// concat(a, b) -> transformer block on 2C channels -> 1x1 projection to C.
struct BaseFusionImpl : torch::nn::Module {
  explicit BaseFusionImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& ir, const torch::Tensor& vis);

  RestormerBlock block{nullptr};
  torch::nn::Conv2d project{nullptr};
};
TORCH_MODULE(BaseFusion);

/// concat(a, b) -> coupling block on 2C channels -> 1x1 projection to C.
struct DetailFusionImpl : torch::nn::Module {
  explicit DetailFusionImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& ir, const torch::Tensor& vis);

  AffineCoupling block{nullptr};
  torch::nn::Conv2d project{nullptr};
};
TORCH_MODULE(DetailFusion);

/// concat(base, detail) -> 1x1 reduction -> transformer blocks -> 1x1 head -> sigmoid.
struct DecoderImpl : torch::nn::Module {
  explicit DecoderImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& base, const torch::Tensor& detail);

  torch::nn::Conv2d reduce{nullptr};
  torch::nn::Sequential blocks{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(Decoder);

/// Per-modality features produced by the encoders.
struct EncodedFeatures {
  torch::Tensor shared;
  torch::Tensor base;
  torch::Tensor detail;
  std::vector<torch::Tensor> base_taps;
};

struct Reconstruction {
  torch::Tensor ir_hat;
  torch::Tensor vis_hat;
  EncodedFeatures ir;
  EncodedFeatures vis;
};

struct FusionOutput {
  torch::Tensor fused;
  torch::Tensor fused_base;
  torch::Tensor fused_detail;
  EncodedFeatures ir;
  EncodedFeatures vis;
};

/// The dual-branch fusion network. Stage I trains shared/base/detail encoders and
/// the decoder through forward_reconstruct; Stage II adds the two fusion layers
/// through forward_fuse.
struct DafNetImpl : torch::nn::Module {
  explicit DafNetImpl(const ModelConfig& config);

  torch::Tensor encode_shared(const torch::Tensor& images);
  BaseFeatures encode_base(const torch::Tensor& shared);
  torch::Tensor encode_detail(const torch::Tensor& shared);
  torch::Tensor invert_detail_block(const torch::Tensor& output, int64_t block_index);
  torch::Tensor fuse_base(const torch::Tensor& ir, const torch::Tensor& vis);
  torch::Tensor fuse_detail(const torch::Tensor& ir, const torch::Tensor& vis);
  torch::Tensor decode(const torch::Tensor& base, const torch::Tensor& detail);

  EncodedFeatures encode(const torch::Tensor& images);
  Reconstruction forward_reconstruct(const torch::Tensor& ir, const torch::Tensor& vis);
  FusionOutput forward_fuse_detailed(const torch::Tensor& ir, const torch::Tensor& vis);
  torch::Tensor forward_fuse(const torch::Tensor& ir, const torch::Tensor& vis);

  std::vector<torch::Tensor> encoder_parameters() const;
  std::vector<torch::Tensor> fusion_parameters() const;
  std::vector<torch::Tensor> decoder_parameters() const;

  const ModelConfig& config() const { return config_; }

  SharedEncoder shared{nullptr};
  BaseEncoder base{nullptr};
  DetailEncoder detail{nullptr};
  BaseFusion base_fusion{nullptr};
  DetailFusion detail_fusion{nullptr};
  Decoder decoder{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(DafNet);

/// Builds a model with parameters drawn from torch's generator seeded by `seed`.
DafNet make_model(const ModelConfig& config, uint64_t seed);

}  // namespace daf::model

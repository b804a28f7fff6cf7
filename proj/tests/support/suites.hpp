#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace daf::testing {

struct GradientResult {
  std::string name;
  double max_relative_error = 0.0;
};

/// Every network block type in double precision on 8x8 inputs: 10 sampled
/// parameter coordinates plus 10 input coordinates per block, with
/// parameters randomized so zero-initialized layers are generic.
std::vector<GradientResult> block_gradient_errors(uint64_t seed);

/// Every loss w.r.t. its image/feature inputs, 8x8 single-channel images
/// (16x16 for SSIM, whose window is 11x11).
std::vector<GradientResult> loss_gradient_errors(uint64_t seed);

}  // namespace daf::testing

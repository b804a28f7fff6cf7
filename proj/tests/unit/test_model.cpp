#include <gtest/gtest.h>

#include "daf/errors.hpp"
#include "daf/model.hpp"
#include "suites.hpp"
#include "support.hpp"

using namespace daf::model;

namespace {

daf::ModelConfig small_config() {
  daf::ModelConfig c;
  c.embed_dim = 16;
  c.num_heads = 4;
  return c;
}

}  // namespace

TEST(ImageBatch, Contract) {
  EXPECT_NO_THROW(check_image_batch(torch::rand({2, 1, 16, 24})));
  EXPECT_NO_THROW(check_image_batch(torch::rand({1, 3, 8, 8})));
  EXPECT_THROW(check_image_batch(torch::rand({1, 1, 12, 16})), daf::DimensionError);
  EXPECT_THROW(check_image_batch(torch::rand({1, 2, 16, 16})), daf::DimensionError);
  EXPECT_THROW(check_image_batch(torch::rand({1, 16, 16})), daf::DimensionError);
  auto nan = torch::rand({1, 1, 8, 8});
  nan[0][0][2][2] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(check_image_batch(nan), daf::ValidationError);
  EXPECT_THROW(check_image_batch(torch::full({1, 1, 8, 8}, 1.5)), daf::ValidationError);
}

TEST(Luminance, Bt601Weights) {
  auto rgb = torch::zeros({1, 3, 8, 8});
  rgb.select(1, 0).fill_(1.0);
  EXPECT_NEAR(to_luminance(rgb).max().item<double>(), 0.299, 1e-6);
  const auto gray = torch::rand({1, 1, 8, 8});
  EXPECT_TRUE(torch::equal(to_luminance(gray.expand({1, 3, 8, 8})), gray) ||
              (to_luminance(gray.expand({1, 3, 8, 8})) - gray).abs().max().item<double>() < 1e-6);
}

TEST(ModelConfigCheck, RejectsBadShapes) {
  daf::ModelConfig c;
  c.embed_dim = 60;  // not divisible by 8 heads
  EXPECT_THROW(c.validate(), daf::ConfigError);
  c = daf::ModelConfig{};
  c.embed_dim = 9;
  c.num_heads = 3;  // divisible, but odd channels cannot be split for coupling
  EXPECT_THROW(c.validate(), daf::ConfigError);
  c = daf::ModelConfig{};
  c.base_blocks = 2;
  EXPECT_THROW(c.validate(), daf::ConfigError);
}

TEST(Encoders, PublishedWidthAndShapes) {
  auto net = make_model(daf::ModelConfig{}, 0);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto shared = net->encode_shared(torch::rand({2, 1, 32, 32}));
  EXPECT_EQ(shared.sizes(), (std::vector<int64_t>{2, 64, 32, 32}));
  const auto base = net->encode_base(shared);
  ASSERT_EQ(base.taps.size(), 3u);
  for (const auto& t : base.taps) EXPECT_EQ(t.sizes(), shared.sizes());
  EXPECT_TRUE(base.taps.back().is_same(base.output));
  EXPECT_EQ(net->encode_detail(shared).sizes(), shared.sizes());
}

TEST(Encoders, ThreeChannelInputUsesLuminance) {
  auto net = make_model(small_config(), 0);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto rgb = torch::rand({1, 3, 16, 16});
  EXPECT_TRUE(torch::equal(net->encode_shared(rgb), net->encode_shared(to_luminance(rgb))));
}

TEST(Encoders, ZeroInputFiniteAndDeterministic) {
  auto net = make_model(small_config(), 0);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto zero = torch::zeros({1, 1, 16, 16});
  const auto a = net->encode(zero), b = net->encode(zero);
  EXPECT_TRUE(torch::isfinite(a.shared).all().item<bool>());
  EXPECT_TRUE(torch::isfinite(a.base).all().item<bool>());
  EXPECT_TRUE(torch::isfinite(a.detail).all().item<bool>());
  EXPECT_TRUE(torch::equal(a.base, b.base));
  EXPECT_TRUE(torch::equal(a.detail, b.detail));
}

TEST(Encoders, RejectBadImages) {
  auto net = make_model(small_config(), 0);
  EXPECT_THROW(net->encode_shared(torch::rand({1, 1, 12, 16})), daf::DimensionError);
  EXPECT_THROW(net->encode_shared(torch::full({1, 1, 8, 8}, std::numeric_limits<float>::infinity())), daf::ValidationError);
}

TEST(DetailBlocks, IdentityAtInit) {
  auto net = make_model(small_config(), 0);
  torch::NoGradGuard no_grad;
  const auto y = torch::randn({2, 16, 8, 8});
  for (int64_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(torch::equal(net->invert_detail_block(y, i), y));
    EXPECT_TRUE(torch::equal(net->detail->forward_block(y, i), y));
  }
}

TEST(DetailBlocks, RoundTripOnRandomInputs) {
  auto net = make_model(small_config(), 0);
  daf::testing::randomize_parameters(*net->detail, 0.2, 3);
  torch::NoGradGuard no_grad;
  for (int64_t block = 0; block < 3; ++block) {
    double worst_inverse = 0.0, worst_forward = 0.0;
    for (int t = 0; t < 100; ++t) {
      const auto x = torch::randn({1, 16, 8, 8});
      const auto y = net->detail->forward_block(x, block);
      worst_inverse = std::max(worst_inverse, (net->invert_detail_block(y, block) - x).abs().max().item<double>());
      worst_forward = std::max(worst_forward, (net->detail->forward_block(net->invert_detail_block(x, block), block) - x)
                                                  .abs().max().item<double>());
    }
    EXPECT_LE(worst_inverse, 1e-4) << "block " << block;
    EXPECT_LE(worst_forward, 1e-4) << "block " << block;
  }
}

TEST(DetailBlocks, IndexOutOfRange) {
  auto net = make_model(small_config(), 0);
  const auto y = torch::zeros({1, 16, 8, 8});
  EXPECT_THROW(net->invert_detail_block(y, 3), std::out_of_range);
  EXPECT_THROW(net->invert_detail_block(y, -1), std::out_of_range);
}

TEST(DetailBlocks, ScaleIsSoftClamped) {
  const auto s = torch::linspace(-100, 100, 201);
  const auto c = clamp_log_scale(s);
  EXPECT_LT(c.abs().max().item<double>(), 2.0 + 1e-6);
  EXPECT_NEAR(clamp_log_scale(torch::tensor({0.01})).item<double>(), 0.01, 1e-6);
}

TEST(FusionLayers, ShapesDeterminismAndErrors) {
  auto net = make_model(small_config(), 0);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto a = torch::randn({1, 16, 32, 32}), b = torch::randn({1, 16, 32, 32});
  for (int which = 0; which < 2; ++which) {
    auto fuse = [&](const torch::Tensor& x, const torch::Tensor& y) {
      return which == 0 ? net->fuse_base(x, y) : net->fuse_detail(x, y);
    };
    const auto f = fuse(a, b);
    EXPECT_EQ(f.sizes(), a.sizes());
    EXPECT_TRUE(torch::equal(fuse(a, a), fuse(a, a)));
    EXPECT_TRUE(torch::isfinite(fuse(a, a)).all().item<bool>());
    EXPECT_THROW(fuse(a, torch::randn({1, 16, 16, 32})), daf::DimensionError);
  }
}

TEST(FusionLayers, GradientReachesBothInputs) {
  auto net = make_model(small_config(), 0);
  net->to(torch::kDouble);
  daf::testing::randomize_parameters(*net, 0.3, 9);
  std::mt19937_64 rng(0);
  for (int which = 0; which < 2; ++which) {
    auto a = torch::randn({1, 16, 4, 4}, torch::kDouble).requires_grad_();
    auto b = torch::randn({1, 16, 4, 4}, torch::kDouble).requires_grad_();
    auto fn = [&] { return daf::testing::projected_sum(which == 0 ? net->fuse_base(a, b) : net->fuse_detail(a, b), 5); };
    EXPECT_LT(daf::testing::gradient_check(fn, {a, b}, 10, rng), 1e-3);
    a.mutable_grad() = torch::Tensor();
    b.mutable_grad() = torch::Tensor();
    fn().backward();
    EXPECT_GT(a.grad().abs().sum().item<double>(), 0.0);
    EXPECT_GT(b.grad().abs().sum().item<double>(), 0.0);
  }
}

TEST(Decoder, OutputBoundedForArbitraryFeatures) {
  auto net = make_model(small_config(), 0);
  net->eval();
  torch::NoGradGuard no_grad;
  for (double scale : {1.0, 100.0, 1e4}) {
    const auto out = net->decode(torch::randn({2, 16, 16, 16}) * scale, torch::randn({2, 16, 16, 16}) * scale);
    EXPECT_EQ(out.sizes(), (std::vector<int64_t>{2, 1, 16, 16}));
    EXPECT_GE(out.min().item<double>(), 0.0);
    EXPECT_LE(out.max().item<double>(), 1.0);
  }
  EXPECT_THROW(net->decode(torch::randn({1, 16, 8, 8}), torch::randn({1, 16, 16, 8})), daf::DimensionError);
}

TEST(Decoder, PublishedWidthShape) {
  auto net = make_model(daf::ModelConfig{}, 0);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto f = torch::randn({1, 64, 128, 128});
  const auto out = net->decode(f, f);
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 1, 128, 128}));
  EXPECT_TRUE(torch::equal(out, net->decode(f, f)));
}

TEST(Paths, ReconstructAndFuse) {
  auto net = make_model(small_config(), 0);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto ir = torch::rand({1, 1, 24, 16}), vis = torch::rand({1, 3, 24, 16});
  const auto rec = net->forward_reconstruct(ir, vis);
  EXPECT_EQ(rec.ir_hat.sizes(), ir.sizes());
  EXPECT_EQ(rec.vis_hat.sizes(), ir.sizes());
  EXPECT_TRUE(torch::isfinite(rec.ir_hat).all().item<bool>());
  const auto fused = net->forward_fuse(ir, vis);
  EXPECT_EQ(fused.sizes(), ir.sizes());
  EXPECT_GE(fused.min().item<double>(), 0.0);
  EXPECT_LE(fused.max().item<double>(), 1.0);
  EXPECT_TRUE(torch::equal(fused, net->forward_fuse(ir, vis)));
  EXPECT_THROW(net->forward_fuse(ir, torch::rand({1, 3, 16, 16})), daf::DimensionError);
}

TEST(Paths, SameSeedSameParameters) {
  auto a = make_model(small_config(), 42), b = make_model(small_config(), 42), c = make_model(small_config(), 43);
  const auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  bool all_equal = true, any_diff = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    all_equal &= torch::equal(pa[i], pb[i]);
    any_diff |= !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff);
}

TEST(GradientChecks, EveryBlockType) {
  const auto results = daf::testing::block_gradient_errors(3);
  EXPECT_EQ(results.size(), 13u);
  for (const auto& r : results) EXPECT_LT(r.max_relative_error, 1e-3) << r.name;
}

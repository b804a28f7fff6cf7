#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "daf/errors.hpp"
#include "daf/metrics.hpp"
#include "daf/synth.hpp"
#include "support.hpp"

namespace m = daf::metrics;
namespace oracle = daf::testing::oracle;

namespace {

cv::Mat noise_u8(int rows, int cols, uint64_t seed) {
  cv::Mat img(rows, cols, CV_8UC1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) img.at<uint8_t>(r, c) = static_cast<uint8_t>(u(rng));
  return img;
}

// Blocky structure with 8 gray levels.
cv::Mat blocks_u8(int size, uint64_t seed) {
  cv::Mat img(size, size, CV_8UC1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 7);
  for (int r = 0; r < size; r += 16)
    for (int c = 0; c < size; c += 16) img(cv::Rect(c, r, 16, 16)).setTo(level(rng) * 32 + 16);
  return img;
}

cv::Mat natural_image() { return daf::synth::render_pair(7, 0).ir; }

cv::Mat vis_gray(const daf::synth::SyntheticPair& p) {
  cv::Mat g;
  cv::cvtColor(p.vis_bgr, g, cv::COLOR_BGR2GRAY);
  return g;
}

// Xydeas-Petrovic edge preservation, written from the definition.
double qabf_oracle(const cv::Mat& f8, const cv::Mat& a8, const cv::Mat& b8) {
  const int rows = f8.rows, cols = f8.cols;
  auto px = [&](const cv::Mat& img, int r, int c) -> double {
    return img.at<uint8_t>(std::clamp(r, 0, rows - 1), std::clamp(c, 0, cols - 1));
  };
  auto grad = [&](const cv::Mat& img, int r, int c, double& g, double& a) {
    const double sx = px(img, r - 1, c + 1) + 2 * px(img, r, c + 1) + px(img, r + 1, c + 1) - px(img, r - 1, c - 1) -
                      2 * px(img, r, c - 1) - px(img, r + 1, c - 1);
    const double sy = px(img, r + 1, c - 1) + 2 * px(img, r + 1, c) + px(img, r + 1, c + 1) - px(img, r - 1, c - 1) -
                      2 * px(img, r - 1, c) - px(img, r - 1, c + 1);
    g = std::hypot(sx, sy);
    a = sx == 0.0 ? std::numbers::pi / 2 : std::atan(sy / sx);
  };
  auto q = [](double gs, double as, double gf, double af) {
    const double rel = (gs == 0.0 && gf == 0.0) ? 0.0 : std::min(gs, gf) / std::max(gs, gf);
    const double orient = std::abs(std::abs(as - af) - std::numbers::pi / 2) * 2 / std::numbers::pi;
    return 0.9994 / (1 + std::exp(-15 * (rel - 0.5))) * 0.9879 / (1 + std::exp(-22 * (orient - 0.8)));
  };
  double num = 0.0, den = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double ga, aa, gb, ab, gf, af;
      grad(a8, r, c, ga, aa);
      grad(b8, r, c, gb, ab);
      grad(f8, r, c, gf, af);
      num += q(ga, aa, gf, af) * ga + q(gb, ab, gf, af) * gb;
      den += ga + gb;
    }
  }
  return den > 0 ? num / den : 0.0;
}

cv::Mat roll(const cv::Mat& img, int dy, int dx) {
  cv::Mat out(img.size(), img.type());
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c)
      out.at<uint8_t>((r + dy) % img.rows, (c + dx) % img.cols) = img.at<uint8_t>(r, c);
  return out;
}

// Smooth image that tiles seamlessly, so circular shifts are pure translations.
cv::Mat periodic_u8(int size, double phase) {
  cv::Mat img(size, size, CV_8UC1);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double u = 2 * std::numbers::pi * r / size, v = 2 * std::numbers::pi * c / size;
      const double val = 128 + 50 * std::sin(2 * u + phase) + 40 * std::cos(3 * v - phase) + 25 * std::sin(u + 4 * v);
      img.at<uint8_t>(r, c) = cv::saturate_cast<uint8_t>(val);
    }
  return img;
}

}  // namespace

TEST(Entropy, ClosedForms) {
  EXPECT_EQ(m::entropy(cv::Mat(64, 64, CV_8UC1, cv::Scalar(90))), 0.0);
  cv::Mat uniform(256, 256, CV_8UC1);
  for (int r = 0; r < 256; ++r)
    for (int c = 0; c < 256; ++c) uniform.at<uint8_t>(r, c) = static_cast<uint8_t>(c);
  EXPECT_DOUBLE_EQ(m::entropy(uniform), 8.0);
  cv::Mat two(32, 32, CV_8UC1, cv::Scalar(10));
  two.rowRange(0, 16).setTo(200);
  EXPECT_DOUBLE_EQ(m::entropy(two), 1.0);
}

TEST(Entropy, MatchesHistogramOracle) {
  const auto img = natural_image();
  EXPECT_NEAR(m::entropy(img), oracle::entropy_u8(img), 1e-12);
}

TEST(StdDev, ClosedForms) {
  EXPECT_EQ(m::std_dev(cv::Mat(16, 16, CV_8UC1, cv::Scalar(3))), 0.0);
  cv::Mat half(16, 16, CV_8UC1, cv::Scalar(0));
  half.colRange(8, 16).setTo(255);
  EXPECT_DOUBLE_EQ(m::std_dev(half), 127.5);
  cv::Mat d;
  natural_image().convertTo(d, CV_64F);
  EXPECT_NEAR(m::std_dev(d * -2.5), 2.5 * m::std_dev(d), 1e-9);
}

TEST(SpatialFrequency, ClosedForms) {
  EXPECT_EQ(m::spatial_frequency(cv::Mat(16, 16, CV_8UC1, cv::Scalar(100))), 0.0);
  cv::Mat stripes(32, 32, CV_8UC1);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) stripes.at<uint8_t>(r, c) = c % 2 ? 255 : 0;
  EXPECT_DOUBLE_EQ(m::spatial_frequency(stripes), 255.0);
  const auto img = natural_image();
  cv::Mat rotated;
  cv::rotate(img, rotated, cv::ROTATE_90_CLOCKWISE);
  EXPECT_NEAR(m::spatial_frequency(rotated), m::spatial_frequency(img), 1e-9);
}

TEST(MutualInformation, SelfFusionIsTwiceEntropy) {
  const auto img = natural_image();
  EXPECT_NEAR(m::mutual_information(img, img, img), 2.0 * m::entropy(img), 1e-9);
}

TEST(MutualInformation, IndependentNoiseNearZero) {
  const auto a = blocks_u8(256, 1), b = blocks_u8(256, 2), f = noise_u8(256, 256, 3);
  const double mi = m::mutual_information(f, a, b);
  EXPECT_GE(mi, 0.0);
  EXPECT_LE(mi, 0.1);
}

TEST(Scd, IndependentZeroMeanSourcesGiveTwo) {
  cv::Mat a(128, 128, CV_64F), b(128, 128, CV_64F);
  cv::RNG rng(4);
  rng.fill(a, cv::RNG::NORMAL, 0.0, 1.0);
  rng.fill(b, cv::RNG::NORMAL, 0.0, 1.0);
  EXPECT_NEAR(m::scd(a + b, a, b), 2.0, 1e-9);
}

TEST(Scd, DegenerateAndRange) {
  const auto img = natural_image();
  EXPECT_EQ(m::scd(img, img, img), 0.0);
  const auto p = daf::synth::render_pair(3, 1);
  const double v = m::scd(noise_u8(p.ir.rows, p.ir.cols, 1), p.ir, vis_gray(p));
  EXPECT_GE(v, -2.0);
  EXPECT_LE(v, 2.0);
}

TEST(Vif, IdenticalSignalsGiveOnePerSource) {
  const auto img = natural_image();
  EXPECT_NEAR(m::vif(img, img), 1.0, 1e-6);
  EXPECT_NEAR(m::vif_fusion(img, img, img), 2.0, 1e-6);
}

TEST(Vif, NoiseAgainstStructure) {
  const auto p = daf::synth::render_pair(5, 2);
  const double v = m::vif_fusion(noise_u8(p.ir.rows, p.ir.cols, 9), p.ir, vis_gray(p));
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 0.2);
}

TEST(Qabf, MatchesDefinitionOracle) {
  const auto p = daf::synth::render_pair(11, 0, 64);
  const auto vis = vis_gray(p);
  cv::Mat fused;
  cv::addWeighted(p.ir, 0.6, vis, 0.4, 0.0, fused);
  EXPECT_NEAR(m::qabf(fused, p.ir, vis), qabf_oracle(fused, p.ir, vis), 1e-9);
  const auto noise = noise_u8(64, 64, 2);
  EXPECT_NEAR(m::qabf(noise, p.ir, vis), qabf_oracle(noise, p.ir, vis), 1e-9);
}

TEST(Qabf, SelfFusionEqualsSigmoidCeiling) {
  // With identical images every edge pixel scores Q_g(1) * Q_a(1).
  const double ceiling = 0.9994 / (1 + std::exp(-15 * 0.5)) * 0.9879 / (1 + std::exp(-22 * 0.2));
  const auto img = natural_image();
  EXPECT_NEAR(m::qabf(img, img, img), ceiling, 1e-12);
  EXPECT_NEAR(ceiling, 0.97479, 1e-5);
}

TEST(Qabf, ConstantFusedAndRange) {
  const auto p = daf::synth::render_pair(2, 0);
  const auto vis = vis_gray(p);
  EXPECT_NEAR(m::qabf(cv::Mat(p.ir.size(), CV_8UC1, cv::Scalar(128)), p.ir, vis), 0.0, 1e-3);
  const double q = m::qabf(noise_u8(p.ir.rows, p.ir.cols, 4), p.ir, vis);
  EXPECT_GE(q, 0.0);
  EXPECT_LE(q, 1.0);
}

TEST(SsimFusion, Properties) {
  const auto p = daf::synth::render_pair(6, 0);
  const auto vis = vis_gray(p);
  EXPECT_NEAR(m::ssim_fusion(p.ir, p.ir, p.ir), 1.0, 1e-6);
  cv::Mat fused;
  cv::addWeighted(p.ir, 0.5, vis, 0.5, 0.0, fused);
  const double s = m::ssim_fusion(fused, p.ir, vis);
  EXPECT_NEAR(s, m::ssim_fusion(fused, vis, p.ir), 1e-12);
  EXPECT_LE(s, std::max(m::ssim_fusion(fused, p.ir, p.ir), m::ssim_fusion(fused, vis, vis)) + 1e-12);
}

TEST(Degenerate, ConstantImagesAreNanFree) {
  const cv::Mat c0(64, 64, CV_8UC1, cv::Scalar(0)), c1(64, 64, CV_8UC1, cv::Scalar(200));
  for (const auto& [f, a, b] : {std::tuple{c0, c0, c0}, std::tuple{c1, c0, c1}, std::tuple{c0, natural_image()(cv::Rect(0, 0, 64, 64)), c1}}) {
    for (double v : m::as_row(m::evaluate(f, a, b))) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Invariance, PixelStatisticsUnderCircularShift) {
  const auto a = periodic_u8(128, 0.0), b = periodic_u8(128, 1.3), f = periodic_u8(128, 0.6);
  const auto base = m::as_row(m::evaluate(f, a, b));
  const auto moved = m::as_row(m::evaluate(roll(f, 5, 9), roll(a, 5, 9), roll(b, 5, 9)));
  for (size_t i : {0u, 1u, 3u, 4u}) EXPECT_NEAR(moved[i], base[i], 1e-9) << m::kColumnNames[i];
}

TEST(Invariance, TranslationWithConsistentCropping) {
  // The same triple placed at two offsets inside different surroundings,
  // then cropped back out, scores identically.
  const auto p = daf::synth::render_pair(8, 0, 64);
  const cv::Mat f = (p.ir / 2 + vis_gray(p) / 2), a = p.ir, b = vis_gray(p);
  const auto place = [](const cv::Mat& img, cv::Point at, uint64_t seed) {
    cv::Mat canvas = noise_u8(96, 96, seed);
    img.copyTo(canvas(cv::Rect(at, img.size())));
    return canvas(cv::Rect(at, img.size()));
  };
  const auto base = m::as_row(m::evaluate(f, a, b));
  const cv::Point at(17, 23);
  const auto moved = m::as_row(m::evaluate(place(f, at, 1), place(a, at, 2), place(b, at, 3)));
  for (size_t i = 0; i < base.size(); ++i) EXPECT_EQ(moved[i], base[i]) << m::kColumnNames[i];
}

TEST(Reports, CsvAndTable) {
  const auto p = daf::synth::render_pair(1, 0);
  const auto vis = vis_gray(p);
  auto table = m::summarize({{"b", m::evaluate(p.ir, p.ir, vis)}, {"a", m::evaluate(vis, p.ir, vis)}});
  EXPECT_NEAR(table.mean.en, 0.5 * (table.rows[0].second.en + table.rows[1].second.en), 1e-12);
  std::ostringstream csv;
  m::write_csv(csv, table);
  std::istringstream lines(csv.str());
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0], "filename,EN,SD,SF,MI,SCD,VIF,QABF,SSIM");
  EXPECT_EQ(all[1].substr(0, 2), "b,");
  EXPECT_EQ(all[3].substr(0, 5), "mean,");
  for (const auto& l : all) EXPECT_EQ(std::count(l.begin(), l.end(), ','), 8);
  const auto text = m::format_table(table);
  EXPECT_NE(text.find("QABF"), std::string::npos);
  EXPECT_NE(text.find("mean"), std::string::npos);
}

TEST(Reports, SizeMismatchThrows) {
  EXPECT_THROW(m::evaluate(cv::Mat(8, 8, CV_8UC1), cv::Mat(8, 16, CV_8UC1), cv::Mat(8, 8, CV_8UC1)), daf::DimensionError);
}

#include "daf/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "daf/errors.hpp"
#include "parallel.hpp"

namespace daf::synth {
namespace {

struct Shape {
  bool ellipse;
  cv::Point center;
  cv::Size axes;
  double angle;
  double ir_level;
  double vis_luma;
  cv::Vec3d vis_color;  // BGR, scaled to vis_luma
  double stripe_freq;
  double stripe_angle;
};

/// Random BGR tint rescaled so its BT.601 luma equals `luma`.
cv::Vec3d tinted(std::mt19937_64& rng, double luma) {
  std::uniform_real_distribution<double> u(0.5, 1.0);
  cv::Vec3d bgr(u(rng), u(rng), u(rng));
  const double y = 0.114 * bgr[0] + 0.587 * bgr[1] + 0.299 * bgr[2];
  return bgr * (luma / y);
}

}  // namespace

SyntheticPair render_pair(uint64_t seed, uint64_t index, int size) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(index),
                    static_cast<uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const int n_shapes = 3 + static_cast<int>(rng() % 4);
  std::vector<Shape> shapes;
  for (int i = 0; i < n_shapes; ++i) {
    Shape s;
    s.ellipse = u01(rng) < 0.5;
    s.center = {static_cast<int>(uniform(0.15, 0.85) * size), static_cast<int>(uniform(0.15, 0.85) * size)};
    s.axes = {static_cast<int>(uniform(0.06, 0.2) * size), static_cast<int>(uniform(0.06, 0.2) * size)};
    s.angle = uniform(0.0, 180.0);
    s.ir_level = uniform(0.6, 0.95);
    s.vis_luma = uniform(0.65, 0.9);
    s.vis_color = tinted(rng, s.vis_luma);
    s.stripe_freq = uniform(0.15, 0.6);
    s.stripe_angle = uniform(0.0, std::numbers::pi);
    shapes.push_back(s);
  }

  // Label map: 0 background, i + 1 for shape i (later shapes occlude earlier ones).
  cv::Mat labels = cv::Mat::zeros(size, size, CV_8UC1);
  for (int i = 0; i < n_shapes; ++i) {
    const auto& s = shapes[static_cast<size_t>(i)];
    const cv::Scalar label(i + 1);
    if (s.ellipse) {
      cv::ellipse(labels, s.center, s.axes, s.angle, 0.0, 360.0, label, cv::FILLED);
    } else {
      const cv::RotatedRect rect(s.center, cv::Size2f(2.0f * s.axes.width, 2.0f * s.axes.height),
                                 static_cast<float>(s.angle));
      cv::Point2f corners[4];
      rect.points(corners);
      std::vector<cv::Point> poly(corners, corners + 4);
      cv::fillConvexPoly(labels, poly, label);
    }
  }

  const double ir_bg_top = uniform(0.1, 0.2), ir_bg_bottom = uniform(0.2, 0.3);
  const double vis_bg = uniform(0.2, 0.3);
  const cv::Vec3d vis_bg_tint = tinted(rng, 1.0);
  const double bg_freq_x = uniform(0.05, 0.2), bg_freq_y = uniform(0.05, 0.2), bg_phase = uniform(0.0, 6.28);

  cv::Mat ir(size, size, CV_64F);
  cv::Mat vis(size, size, CV_64FC3);
  for (int r = 0; r < size; ++r) {
    const double t = static_cast<double>(r) / (size - 1);
    for (int c = 0; c < size; ++c) {
      const int label = labels.at<uint8_t>(r, c);
      if (label == 0) {
        ir.at<double>(r, c) = ir_bg_top + (ir_bg_bottom - ir_bg_top) * t;
        const double texture = 0.05 * std::sin(bg_freq_x * c + bg_phase) * std::cos(bg_freq_y * r);
        const double luma = vis_bg + 0.04 * static_cast<double>(c) / size + texture;
        vis.at<cv::Vec3d>(r, c) = vis_bg_tint * luma;
      } else {
        const auto& s = shapes[static_cast<size_t>(label - 1)];
        ir.at<double>(r, c) = s.ir_level;
        const double u = c * std::cos(s.stripe_angle) + r * std::sin(s.stripe_angle);
        const double texture = 1.0 + 0.07 * std::sin(2.0 * std::numbers::pi * s.stripe_freq * u);
        vis.at<cv::Vec3d>(r, c) = s.vis_color * texture;
      }
    }
  }

  cv::GaussianBlur(ir, ir, cv::Size(0, 0), 1.5);
  cv::Mat ir_noise(size, size, CV_64F), vis_noise(size, size, CV_64FC3);
  std::normal_distribution<double> ir_n(0.0, 0.02), vis_n(0.0, 0.025);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      ir_noise.at<double>(r, c) = ir_n(rng);
      vis_noise.at<cv::Vec3d>(r, c) = cv::Vec3d(vis_n(rng), vis_n(rng), vis_n(rng));
    }
  }
  ir += ir_noise;
  vis += vis_noise;

  SyntheticPair out;
  ir.convertTo(out.ir, CV_8UC1, 255.0);  // saturating
  vis.convertTo(out.vis_bgr, CV_8UC3, 255.0);
  out.objects = labels > 0;
  return out;
}

void write_dataset(const std::filesystem::path& out_dir, int n_pairs, uint64_t seed) {
  if (n_pairs < 1) throw ValidationError("synth: n_pairs must be >= 1");
  std::filesystem::create_directories(out_dir / "ir");
  std::filesystem::create_directories(out_dir / "vis");
  detail::parallel_for(static_cast<size_t>(n_pairs), [&](size_t i) {
    const auto pair = render_pair(seed, i);
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%03zu.png", i);
    const auto ir_path = out_dir / "ir" / name;
    const auto vis_path = out_dir / "vis" / name;
    if (!cv::imwrite(ir_path.string(), pair.ir)) throw Error("failed to write '" + ir_path.string() + "'");
    if (!cv::imwrite(vis_path.string(), pair.vis_bgr)) throw Error("failed to write '" + vis_path.string() + "'");
  });
}

}  // namespace daf::synth

#include "daf/metrics.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "daf/errors.hpp"
#include "daf/losses.hpp"

namespace daf::metrics {
namespace {

cv::Mat as_double(const cv::Mat& img) {
  if (img.empty()) throw ValidationError("metric input is empty");
  if (img.channels() != 1) throw DimensionError("metrics expect single-channel images");
  cv::Mat out;
  img.convertTo(out, CV_64F);
  return out;
}

void check_triple(const cv::Mat& f, const cv::Mat& a, const cv::Mat& b) {
  if (f.size() != a.size() || f.size() != b.size()) {
    throw DimensionError("metric inputs differ in size");
  }
}

std::array<double, 256> histogram(const cv::Mat& img) {
  std::array<double, 256> h{};
  const cv::Mat d = as_double(img);
  for (int r = 0; r < d.rows; ++r) {
    const auto* row = d.ptr<double>(r);
    for (int c = 0; c < d.cols; ++c) {
      const int bin = static_cast<int>(std::lround(std::clamp(row[c], 0.0, 255.0)));
      h[static_cast<size_t>(bin)] += 1.0;
    }
  }
  return h;
}

double entropy_of(const std::array<double, 256>& h, double n) {
  double e = 0.0;
  for (double count : h) {
    if (count > 0.0) {
      const double p = count / n;
      e -= p * std::log2(p);
    }
  }
  return e;
}

double pairwise_mi(const cv::Mat& x, const cv::Mat& y) {
  const cv::Mat a = as_double(x), b = as_double(y);
  std::vector<double> joint(256 * 256, 0.0);
  std::array<double, 256> ha{}, hb{};
  const double n = static_cast<double>(a.total());
  for (int r = 0; r < a.rows; ++r) {
    const auto* pa = a.ptr<double>(r);
    const auto* pb = b.ptr<double>(r);
    for (int c = 0; c < a.cols; ++c) {
      const auto i = static_cast<size_t>(std::lround(std::clamp(pa[c], 0.0, 255.0)));
      const auto j = static_cast<size_t>(std::lround(std::clamp(pb[c], 0.0, 255.0)));
      joint[i * 256 + j] += 1.0;
      ha[i] += 1.0;
      hb[j] += 1.0;
    }
  }
  double mi = 0.0;
  for (size_t i = 0; i < 256; ++i) {
    if (ha[i] == 0.0) continue;
    for (size_t j = 0; j < 256; ++j) {
      const double pij = joint[i * 256 + j];
      if (pij > 0.0) mi += (pij / n) * std::log2(pij * n / (ha[i] * hb[j]));
    }
  }
  return std::max(0.0, mi);
}

double pearson(const cv::Mat& x, const cv::Mat& y) {
  const cv::Scalar mx = cv::mean(x), my = cv::mean(y);
  const cv::Mat dx = x - mx[0];
  const cv::Mat dy = y - my[0];
  const double sxx = dx.dot(dx), syy = dy.dot(dy);
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return dx.dot(dy) / std::sqrt(sxx * syy);
}

/// 'valid' correlation: full filter2D then crop the fully-overlapped region.
cv::Mat filter_valid(const cv::Mat& img, const cv::Mat& kernel) {
  cv::Mat full;
  cv::filter2D(img, full, CV_64F, kernel, cv::Point(-1, -1), 0.0, cv::BORDER_CONSTANT);
  const int kr = kernel.rows / 2, kc = kernel.cols / 2;
  if (img.rows <= 2 * kr || img.cols <= 2 * kc) return {};
  return full(cv::Rect(kc, kr, img.cols - 2 * kc, img.rows - 2 * kr)).clone();
}

/// Keeps every second row and column, starting at the first.
cv::Mat decimate(const cv::Mat& img) {
  cv::Mat out((img.rows + 1) / 2, (img.cols + 1) / 2, CV_64F);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out.at<double>(r, c) = img.at<double>(2 * r, 2 * c);
  }
  return out;
}

cv::Mat gaussian_kernel(int n, double sigma) {
  const cv::Mat g = cv::getGaussianKernel(n, sigma, CV_64F);
  return g * g.t();
}

void sobel(const cv::Mat& img, cv::Mat& gx, cv::Mat& gy) {
  const cv::Mat kx = (cv::Mat_<double>(3, 3) << -1, 0, 1, -2, 0, 2, -1, 0, 1);
  const cv::Mat ky = (cv::Mat_<double>(3, 3) << -1, -2, -1, 0, 0, 0, 1, 2, 1);
  cv::filter2D(img, gx, CV_64F, kx, cv::Point(-1, -1), 0.0, cv::BORDER_REPLICATE);
  cv::filter2D(img, gy, CV_64F, ky, cv::Point(-1, -1), 0.0, cv::BORDER_REPLICATE);
}

void edge_strength_orientation(const cv::Mat& img, cv::Mat& g, cv::Mat& a) {
  cv::Mat gx, gy;
  sobel(img, gx, gy);
  cv::sqrt(gx.mul(gx) + gy.mul(gy), g);
  a.create(img.size(), CV_64F);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const double x = gx.at<double>(r, c);
      a.at<double>(r, c) = x == 0.0 ? std::numbers::pi / 2.0 : std::atan(gy.at<double>(r, c) / x);
    }
  }
}

/// Per-pixel edge preservation Q^{XF} of source X in fused F.
cv::Mat edge_preservation(const cv::Mat& gs, const cv::Mat& as, const cv::Mat& gf, const cv::Mat& af) {
  constexpr double kGammaG = 0.9994, kKappaG = -15.0, kSigmaG = 0.5;
  constexpr double kGammaA = 0.9879, kKappaA = -22.0, kSigmaA = 0.8;
  cv::Mat q(gs.size(), CV_64F);
  for (int r = 0; r < gs.rows; ++r) {
    for (int c = 0; c < gs.cols; ++c) {
      const double s = gs.at<double>(r, c), f = gf.at<double>(r, c);
      double rel = 0.0;
      if (s > 0.0 || f > 0.0) rel = s > f ? f / s : s / f;
      // Orientations live in (-pi/2, pi/2) and are compared modulo pi.
      const double orient =
          std::abs(std::abs(as.at<double>(r, c) - af.at<double>(r, c)) - std::numbers::pi / 2.0) / (std::numbers::pi / 2.0);
      const double qg = kGammaG / (1.0 + std::exp(kKappaG * (rel - kSigmaG)));
      const double qa = kGammaA / (1.0 + std::exp(kKappaA * (orient - kSigmaA)));
      q.at<double>(r, c) = qg * qa;
    }
  }
  return q;
}

torch::Tensor to_unit_tensor(const cv::Mat& img) {
  cv::Mat d = as_double(img);
  if (!d.isContinuous()) d = d.clone();
  return torch::from_blob(d.ptr<double>(), {1, 1, d.rows, d.cols}, torch::kDouble).clone() / 255.0;
}

std::string fmt(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

std::vector<double> as_row(const MetricReport& r) { return {r.en, r.sd, r.sf, r.mi, r.scd, r.vif, r.qabf, r.ssim}; }

double entropy(const cv::Mat& img) { return entropy_of(histogram(img), static_cast<double>(img.total())); }

double std_dev(const cv::Mat& img) {
  cv::Scalar mean, sd;
  cv::meanStdDev(as_double(img), mean, sd);
  return sd[0];
}

double spatial_frequency(const cv::Mat& img) {
  const cv::Mat d = as_double(img);
  double rf = 0.0, cf = 0.0;
  if (d.cols > 1) {
    const cv::Mat diff = d.colRange(1, d.cols) - d.colRange(0, d.cols - 1);
    rf = diff.dot(diff) / static_cast<double>(diff.total());
  }
  if (d.rows > 1) {
    const cv::Mat diff = d.rowRange(1, d.rows) - d.rowRange(0, d.rows - 1);
    cf = diff.dot(diff) / static_cast<double>(diff.total());
  }
  return std::sqrt(rf + cf);
}

double mutual_information(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis) {
  check_triple(fused, ir, vis);
  return pairwise_mi(fused, ir) + pairwise_mi(fused, vis);
}

double scd(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis) {
  check_triple(fused, ir, vis);
  const cv::Mat f = as_double(fused), a = as_double(ir), b = as_double(vis);
  return pearson(f - b, a) + pearson(f - a, b);
}

double vif(const cv::Mat& reference, const cv::Mat& distorted) {
  constexpr double kSigmaNsq = 2.0;
  constexpr double kEps = 1e-10;
  cv::Mat ref = as_double(reference), dist = as_double(distorted);
  double num = 0.0, den = 0.0;
  for (int scale = 1; scale <= 4; ++scale) {
    const int n = (1 << (4 - scale + 1)) + 1;
    const cv::Mat win = gaussian_kernel(n, n / 5.0);
    if (scale > 1) {
      ref = filter_valid(ref, win);
      dist = filter_valid(dist, win);
      if (ref.empty()) break;
      ref = decimate(ref);
      dist = decimate(dist);
    }
    const cv::Mat mu1 = filter_valid(ref, win), mu2 = filter_valid(dist, win);
    if (mu1.empty()) break;
    const cv::Mat s1 = filter_valid(ref.mul(ref), win) - mu1.mul(mu1);
    const cv::Mat s2 = filter_valid(dist.mul(dist), win) - mu2.mul(mu2);
    const cv::Mat s12 = filter_valid(ref.mul(dist), win) - mu1.mul(mu2);
    for (int r = 0; r < mu1.rows; ++r) {
      for (int c = 0; c < mu1.cols; ++c) {
        double sigma1 = std::max(0.0, s1.at<double>(r, c));
        double sigma2 = std::max(0.0, s2.at<double>(r, c));
        const double sigma12 = s12.at<double>(r, c);
        double g = sigma12 / (sigma1 + kEps);
        double sv = sigma2 - g * sigma12;
        if (sigma1 < kEps) {
          g = 0.0;
          sv = sigma2;
          sigma1 = 0.0;
        }
        if (sigma2 < kEps) {
          g = 0.0;
          sv = 0.0;
        }
        if (g < 0.0) {
          sv = sigma2;
          g = 0.0;
        }
        sv = std::max(sv, kEps);
        num += std::log10(1.0 + g * g * sigma1 / (sv + kSigmaNsq));
        den += std::log10(1.0 + sigma1 / kSigmaNsq);
      }
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

double vif_fusion(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis) {
  check_triple(fused, ir, vis);
  return vif(ir, fused) + vif(vis, fused);
}

double qabf(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis) {
  check_triple(fused, ir, vis);
  cv::Mat ga, aa, gb, ab, gf, af;
  edge_strength_orientation(as_double(ir), ga, aa);
  edge_strength_orientation(as_double(vis), gb, ab);
  edge_strength_orientation(as_double(fused), gf, af);
  const cv::Mat qa = edge_preservation(ga, aa, gf, af);
  const cv::Mat qb = edge_preservation(gb, ab, gf, af);
  const double weight = cv::sum(ga)[0] + cv::sum(gb)[0];
  if (weight <= 0.0) return 0.0;
  return (qa.dot(ga) + qb.dot(gb)) / weight;
}

double ssim_fusion(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis) {
  check_triple(fused, ir, vis);
  torch::NoGradGuard no_grad;
  const auto f = to_unit_tensor(fused);
  const double sa = loss::ssim_index(f, to_unit_tensor(ir)).item<double>();
  const double sb = loss::ssim_index(f, to_unit_tensor(vis)).item<double>();
  return 0.5 * (sa + sb);
}

MetricReport evaluate(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis) {
  check_triple(fused, ir, vis);
  MetricReport r;
  r.en = entropy(fused);
  r.sd = std_dev(fused);
  r.sf = spatial_frequency(fused);
  r.mi = mutual_information(fused, ir, vis);
  r.scd = scd(fused, ir, vis);
  r.vif = vif_fusion(fused, ir, vis);
  r.qabf = qabf(fused, ir, vis);
  r.ssim = ssim_fusion(fused, ir, vis);
  return r;
}

EvaluationTable summarize(std::vector<std::pair<std::string, MetricReport>> rows) {
  EvaluationTable t;
  t.rows = std::move(rows);
  if (t.rows.empty()) return t;
  std::vector<double> acc(8, 0.0);
  for (const auto& [name, report] : t.rows) {
    const auto row = as_row(report);
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += row[i];
  }
  for (double& v : acc) v /= static_cast<double>(t.rows.size());
  t.mean = {acc[0], acc[1], acc[2], acc[3], acc[4], acc[5], acc[6], acc[7]};
  return t;
}

void write_csv(std::ostream& out, const EvaluationTable& table) {
  out << "filename";
  for (const char* name : kColumnNames) out << ',' << name;
  out << '\n';
  auto emit = [&](const std::string& name, const MetricReport& r) {
    out << name;
    for (double v : as_row(r)) out << ',' << fmt(v, 6);
    out << '\n';
  };
  for (const auto& [name, report] : table.rows) emit(name, report);
  emit("mean", table.mean);
}

void write_csv(const std::filesystem::path& path, const EvaluationTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_csv(out, table);
}

std::string format_table(const EvaluationTable& table) {
  size_t name_width = 8;
  for (const auto& [name, r] : table.rows) name_width = std::max(name_width, name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "image";
  for (const char* name : kColumnNames) out << std::right << std::setw(9) << name;
  out << '\n';
  auto emit = [&](const std::string& name, const MetricReport& r) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << name;
    for (double v : as_row(r)) out << std::right << std::setw(9) << fmt(v, 3);
    out << '\n';
  };
  for (const auto& [name, r] : table.rows) emit(name, r);
  out << std::string(name_width + 2 + 9 * 8, '-') << '\n';
  emit("mean", table.mean);
  return out.str();
}

}  // namespace daf::metrics

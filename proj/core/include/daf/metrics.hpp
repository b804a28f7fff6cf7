#pragma once

// Fusion-quality metrics on single-channel images. Inputs are cv::Mat of any
// depth holding intensities on the 0..255 scale; evaluate() feeds them
// 8-bit-quantized luminance.

#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

namespace daf::metrics {

struct MetricReport {
  double en = 0.0;
  double sd = 0.0;
  double sf = 0.0;
  double mi = 0.0;
  double scd = 0.0;
  double vif = 0.0;
  double qabf = 0.0;
  double ssim = 0.0;
};

/// Column order used by tables and CSV files.
inline constexpr const char* kColumnNames[] = {"EN", "SD", "SF", "MI", "SCD", "VIF", "QABF", "SSIM"};
std::vector<double> as_row(const MetricReport& r);

/// Shannon entropy (bits) of the 256-bin histogram of round(clamp(x, 0, 255)).
double entropy(const cv::Mat& img);
/// Population standard deviation.
double std_dev(const cv::Mat& img);
/// sqrt(RF^2 + CF^2); RF/CF are RMS horizontal/vertical first differences.
double spatial_frequency(const cv::Mat& img);
/// MI(F, A) + MI(F, B) in bits from 256x256 joint histograms.
double mutual_information(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis);
/// cc(F - B, A) + cc(F - A, B); a zero-variance operand contributes 0.
double scd(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis);
/// Pixel-domain multi-scale VIF (4 scales, sigma_nsq = 2) of each source
/// against the fused image, summed over the two sources.
double vif_fusion(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis);
/// Single-source VIF with `reference` as the undistorted signal.
double vif(const cv::Mat& reference, const cv::Mat& distorted);
/// Sobel edge strength/orientation preservation, weighted by source edge strength.
double qabf(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis);
/// Mean of SSIM(F, A) and SSIM(F, B) computed with loss::ssim_index.
double ssim_fusion(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis);

/// All eight metrics for one (fused, ir, vis) triple.
MetricReport evaluate(const cv::Mat& fused, const cv::Mat& ir, const cv::Mat& vis);

struct EvaluationTable {
  std::vector<std::pair<std::string, MetricReport>> rows;
  MetricReport mean;
};

EvaluationTable summarize(std::vector<std::pair<std::string, MetricReport>> rows);

/// filename + 8 metric columns, then a "mean" footer row.
void write_csv(std::ostream& out, const EvaluationTable& table);
void write_csv(const std::filesystem::path& path, const EvaluationTable& table);
/// Aligned text table in the same column order.
std::string format_table(const EvaluationTable& table);

}  // namespace daf::metrics

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace daf::io {

namespace fs = std::filesystem;

/// One registered infrared / visible pair on the [0, 1] scale.
struct ImagePair {
  torch::Tensor ir;       // (1, H, W) float
  torch::Tensor vis_rgb;  // (3, H, W) float, RGB order
  std::string id;         // shared filename stem
  std::string source;     // infrared path, for error messages

  int64_t height() const { return ir.size(1); }
  int64_t width() const { return ir.size(2); }
};

using WarningSink = std::function<void(const std::string&)>;

/// Writes to std::clog with a "warning: " prefix.
void log_warning(const std::string& message);

/// Loads an 8-bit grayscale/RGB raster pair. An infrared file with three
/// identical channels collapses to one channel; sizes must match; sizes not
/// divisible by 8 are center-cropped to the nearest multiple (with a warning).
ImagePair load_pair(const fs::path& ir_path, const fs::path& vis_path, const WarningSink& warn = log_warning);

/// Pairs matched by filename stem across two subdirectories of `root`.
struct DatasetManifest {
  fs::path root;
  fs::path ir_dir;
  fs::path vis_dir;
  std::vector<std::string> ids;  // lexicographic
  std::vector<fs::path> ir_files;
  std::vector<fs::path> vis_files;

  size_t size() const { return ids.size(); }
};

/// Scans root/ir_subdir and root/vis_subdir. Every stem must resolve to exactly
/// one raster file in each directory; mismatches raise a ValidationError.
DatasetManifest scan_dataset(const fs::path& root, const std::string& ir_subdir = "ir",
                             const std::string& vis_subdir = "vis");

std::vector<ImagePair> load_dataset(const DatasetManifest& manifest, const WarningSink& warn = log_warning);

/// True for the raster extensions the loader accepts.
bool is_raster_file(const fs::path& path);

struct LumaChroma {
  torch::Tensor y;   // (1, H, W)
  torch::Tensor cb;  // (1, H, W), neutral at 0.5
  torch::Tensor cr;  // (1, H, W), neutral at 0.5
};

/// ITU-R BT.601 full-range conversion on [0, 1] data.
LumaChroma rgb_to_luma_chroma(const torch::Tensor& rgb);
torch::Tensor luma_chroma_to_rgb(const torch::Tensor& y, const torch::Tensor& cb, const torch::Tensor& cr);

/// (C, H, W) float [0, 1] <-> 8-bit cv::Mat (BGR for 3 channels).
cv::Mat to_mat_u8(const torch::Tensor& chw);
torch::Tensor from_mat_u8(const cv::Mat& mat);

void write_png(const fs::path& path, const torch::Tensor& chw);

/// Reads an 8-bit image as single-channel luminance (RGB files are converted with BT.601).
cv::Mat read_luminance_u8(const fs::path& path);

}  // namespace daf::io

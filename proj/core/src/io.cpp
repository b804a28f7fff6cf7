#include "daf/io.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "daf/errors.hpp"

namespace daf::io {
namespace {

cv::Mat read_u8(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("image file not found: '" + path.string() + "'");
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw ValidationError("cannot decode image '" + path.string() + "'");
  if (img.depth() != CV_8U) throw ValidationError("image '" + path.string() + "' is not 8-bit");
  if (img.channels() == 4) cv::cvtColor(img, img, cv::COLOR_BGRA2BGR);
  if (img.channels() != 1 && img.channels() != 3) {
    throw ValidationError("image '" + path.string() + "' has unsupported channel count " +
                          std::to_string(img.channels()));
  }
  return img;
}

bool channels_identical(const cv::Mat& bgr) {
  std::vector<cv::Mat> planes;
  cv::split(bgr, planes);
  return cv::countNonZero(planes[0] != planes[1]) == 0 && cv::countNonZero(planes[0] != planes[2]) == 0;
}

cv::Mat center_crop(const cv::Mat& img, int rows, int cols) {
  const int y0 = (img.rows - rows) / 2;
  const int x0 = (img.cols - cols) / 2;
  return img(cv::Rect(x0, y0, cols, rows)).clone();
}

}  // namespace

void log_warning(const std::string& message) { std::clog << "warning: " << message << '\n'; }

bool is_raster_file(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg";
}

cv::Mat to_mat_u8(const torch::Tensor& chw) {
  if (chw.dim() != 3 || (chw.size(0) != 1 && chw.size(0) != 3)) {
    throw DimensionError("expected a (1|3, H, W) image tensor, got " + c10::str(chw.sizes()));
  }
  const auto hwc = (chw.detach().to(torch::kFloat).clamp(0.0, 1.0) * 255.0)
                       .round()
                       .to(torch::kUInt8)
                       .permute({1, 2, 0})
                       .contiguous();
  const int rows = static_cast<int>(hwc.size(0));
  const int cols = static_cast<int>(hwc.size(1));
  const int type = chw.size(0) == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat mat(rows, cols, type, const_cast<uint8_t*>(hwc.data_ptr<uint8_t>()));
  cv::Mat out = mat.clone();
  if (chw.size(0) == 3) cv::cvtColor(out, out, cv::COLOR_RGB2BGR);
  return out;
}

torch::Tensor from_mat_u8(const cv::Mat& mat) {
  if (mat.depth() != CV_8U || (mat.channels() != 1 && mat.channels() != 3)) {
    throw ValidationError("expected an 8-bit 1- or 3-channel image");
  }
  cv::Mat src;
  if (mat.channels() == 3) {
    cv::cvtColor(mat, src, cv::COLOR_BGR2RGB);
  } else {
    src = mat;
  }
  if (!src.isContinuous()) src = src.clone();
  const auto t = torch::from_blob(src.data, {src.rows, src.cols, src.channels()}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat).div(255.0).contiguous();
}

ImagePair load_pair(const fs::path& ir_path, const fs::path& vis_path, const WarningSink& warn) {
  cv::Mat ir = read_u8(ir_path);
  cv::Mat vis = read_u8(vis_path);

  if (ir.channels() == 3) {
    if (channels_identical(ir)) {
      cv::extractChannel(ir, ir, 0);
    } else {
      warn("infrared image '" + ir_path.string() + "' has distinct color channels; converting to luminance");
      cv::cvtColor(ir, ir, cv::COLOR_BGR2GRAY);
    }
  }
  if (vis.channels() == 1) cv::cvtColor(vis, vis, cv::COLOR_GRAY2BGR);

  if (ir.size() != vis.size()) {
    throw ValidationError("image sizes differ: '" + ir_path.string() + "' is " + std::to_string(ir.cols) + "x" +
                          std::to_string(ir.rows) + " but '" + vis_path.string() + "' is " +
                          std::to_string(vis.cols) + "x" + std::to_string(vis.rows));
  }
  const int rows = ir.rows - ir.rows % 8;
  const int cols = ir.cols - ir.cols % 8;
  if (rows == 0 || cols == 0) {
    throw ValidationError("image '" + ir_path.string() + "' is smaller than 8x8");
  }
  if (rows != ir.rows || cols != ir.cols) {
    warn("pair '" + ir_path.string() + "' / '" + vis_path.string() + "' center-cropped from " +
         std::to_string(ir.cols) + "x" + std::to_string(ir.rows) + " to " + std::to_string(cols) + "x" +
         std::to_string(rows));
    ir = center_crop(ir, rows, cols);
    vis = center_crop(vis, rows, cols);
  }

  ImagePair pair;
  pair.ir = from_mat_u8(ir);
  pair.vis_rgb = from_mat_u8(vis);
  pair.id = ir_path.stem().string();
  pair.source = ir_path.string();
  return pair;
}

DatasetManifest scan_dataset(const fs::path& root, const std::string& ir_subdir, const std::string& vis_subdir) {
  DatasetManifest m;
  m.root = root;
  m.ir_dir = root / ir_subdir;
  m.vis_dir = root / vis_subdir;
  for (const auto& dir : {m.ir_dir, m.vis_dir}) {
    if (!fs::is_directory(dir)) throw ValidationError("dataset directory not found: '" + dir.string() + "'");
  }

  auto index = [](const fs::path& dir) {
    std::map<std::string, std::vector<fs::path>> by_stem;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_raster_file(entry.path())) {
        by_stem[entry.path().stem().string()].push_back(entry.path());
      }
    }
    for (const auto& [stem, files] : by_stem) {
      if (files.size() > 1) {
        throw ValidationError("identifier '" + stem + "' resolves to several files in '" + dir.string() + "'");
      }
    }
    return by_stem;
  };
  const auto ir = index(m.ir_dir);
  const auto vis = index(m.vis_dir);

  for (const auto& [stem, files] : ir) {
    if (!vis.contains(stem)) {
      throw ValidationError("'" + files.front().string() + "' has no counterpart in '" + m.vis_dir.string() + "'");
    }
  }
  for (const auto& [stem, files] : vis) {
    if (!ir.contains(stem)) {
      throw ValidationError("'" + files.front().string() + "' has no counterpart in '" + m.ir_dir.string() + "'");
    }
  }
  if (ir.empty()) throw ValidationError("dataset '" + root.string() + "' contains no image pairs");

  for (const auto& [stem, files] : ir) {  // std::map iterates lexicographically
    m.ids.push_back(stem);
    m.ir_files.push_back(files.front());
    m.vis_files.push_back(vis.at(stem).front());
  }
  return m;
}

std::vector<ImagePair> load_dataset(const DatasetManifest& manifest, const WarningSink& warn) {
  std::vector<ImagePair> pairs;
  pairs.reserve(manifest.size());
  for (size_t i = 0; i < manifest.size(); ++i) pairs.push_back(load_pair(manifest.ir_files[i], manifest.vis_files[i], warn));
  return pairs;
}

LumaChroma rgb_to_luma_chroma(const torch::Tensor& rgb) {
  if (rgb.dim() != 3 || rgb.size(0) != 3) throw DimensionError("expected (3, H, W) RGB, got " + c10::str(rgb.sizes()));
  const auto r = rgb.narrow(0, 0, 1), g = rgb.narrow(0, 1, 1), b = rgb.narrow(0, 2, 1);
  LumaChroma out;
  out.y = 0.299 * r + 0.587 * g + 0.114 * b;
  out.cb = 0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b;
  out.cr = 0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b;
  return out;
}

torch::Tensor luma_chroma_to_rgb(const torch::Tensor& y, const torch::Tensor& cb, const torch::Tensor& cr) {
  if (y.sizes() != cb.sizes() || y.sizes() != cr.sizes()) throw DimensionError("luma/chroma planes differ in shape");
  const auto r = y + 1.402 * (cr - 0.5);
  const auto g = y - 0.344136 * (cb - 0.5) - 0.714136 * (cr - 0.5);
  const auto b = y + 1.772 * (cb - 0.5);
  return torch::cat({r, g, b}, 0).clamp(0.0, 1.0);
}

void write_png(const fs::path& path, const torch::Tensor& chw) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_mat_u8(chw))) throw Error("failed to write '" + path.string() + "'");
}

cv::Mat read_luminance_u8(const fs::path& path) {
  cv::Mat img = read_u8(path);
  if (img.channels() == 3) cv::cvtColor(img, img, cv::COLOR_BGR2GRAY);
  return img;
}

}  // namespace daf::io

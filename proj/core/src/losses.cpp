#include "daf/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "daf/errors.hpp"
#include "daf/kernels.hpp"

namespace daf::loss {
namespace {

namespace F = torch::nn::functional;

constexpr int64_t kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSobelEps = 1e-8;

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
}

torch::Tensor gaussian_window(const torch::Tensor& like) {
  const auto opts = torch::TensorOptions().dtype(like.scalar_type()).device(like.device());
  const auto coords = torch::arange(kSsimWindow, opts) - static_cast<double>(kSsimWindow / 2);
  auto g = torch::exp(-coords.pow(2) / (2.0 * kSsimSigma * kSsimSigma));
  g = g / g.sum();
  return torch::outer(g, g).reshape({1, 1, kSsimWindow, kSsimWindow});
}

torch::Tensor sobel_kernels(const torch::Tensor& like) {
  const auto opts = torch::TensorOptions().dtype(like.scalar_type()).device(like.device());
  const auto gx = torch::tensor({-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0}, opts).reshape({1, 1, 3, 3});
  const auto gy = torch::tensor({-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0}, opts).reshape({1, 1, 3, 3});
  return torch::cat({gx, gy}, 0);  // (2, 1, 3, 3)
}

}  // namespace

double LossReport::value(const std::string& name) const {
  if (name == "total") return total.item<double>();
  for (const auto& [n, v] : terms) {
    if (n == name) return v.item<double>();
  }
  throw std::out_of_range("loss report has no term '" + name + "'");
}

std::map<std::string, double> LossReport::values() const {
  std::map<std::string, double> out;
  for (const auto& [n, v] : terms) out[n] = v.item<double>();
  out["total"] = total.item<double>();
  return out;
}

std::vector<std::string> LossReport::names() const {
  std::vector<std::string> out;
  for (const auto& term : terms) out.push_back(term.first);
  out.emplace_back("total");
  return out;
}

torch::Tensor mse_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
  check_same_shape(x, x_hat, "mse_loss");
  return (x - x_hat).pow(2).mean();
}

torch::Tensor ssim_index(const torch::Tensor& x, const torch::Tensor& y, double c1, double c2) {
  check_same_shape(x, y, "ssim_index");
  if (x.dim() != 4 || x.size(1) != 1) {
    throw DimensionError("ssim_index: expected single-channel (B, 1, H, W), got " + c10::str(x.sizes()));
  }
  if (x.size(2) < kSsimWindow || x.size(3) < kSsimWindow) {
    throw ValidationError("ssim_index: image " + c10::str(x.sizes()) + " is smaller than the 11x11 window");
  }
  const auto win = gaussian_window(x);
  auto filt = [&](const torch::Tensor& t) { return torch::conv2d(t, win); };
  const auto mu_x = filt(x);
  const auto mu_y = filt(y);
  const auto mu_xx = mu_x * mu_x;
  const auto mu_yy = mu_y * mu_y;
  const auto mu_xy = mu_x * mu_y;
  const auto var_x = filt(x * x) - mu_xx;
  const auto var_y = filt(y * y) - mu_yy;
  const auto cov = filt(x * y) - mu_xy;
  const auto map = ((2.0 * mu_xy + c1) * (2.0 * cov + c2)) / ((mu_xx + mu_yy + c1) * (var_x + var_y + c2));
  return map.mean();
}

torch::Tensor sobel_magnitude(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1) {
    throw DimensionError("sobel_magnitude: expected single-channel (B, 1, H, W), got " + c10::str(x.sizes()));
  }
  const auto padded = F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReflect));
  const auto g = torch::conv2d(padded, sobel_kernels(x));
  return torch::sqrt(g.pow(2).sum(1, /*keepdim=*/true) + kSobelEps);
}

torch::Tensor gradient_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
  check_same_shape(x, x_hat, "gradient_loss");
  return (sobel_magnitude(x) - sobel_magnitude(x_hat)).abs().mean();
}

LossReport recon_loss(const torch::Tensor& ir, const torch::Tensor& ir_hat, const torch::Tensor& vis,
                      const torch::Tensor& vis_hat, const LossWeights& w) {
  LossReport r;
  const auto mse = loss::mse_loss(vis, vis_hat) + loss::mse_loss(ir, ir_hat);
  const auto ssim =
      2.0 - (ssim_index(vis, vis_hat, w.ssim_c1, w.ssim_c2) + ssim_index(ir, ir_hat, w.ssim_c1, w.ssim_c2));
  const auto grad = gradient_loss(vis, vis_hat) + gradient_loss(ir, ir_hat);
  r.add("mse", mse);
  r.add("ssim", ssim);
  r.add("grad", grad);
  r.total = mse + w.alpha1 * ssim + w.alpha2 * grad;
  return r;
}

Correlation correlation_coefficient(const torch::Tensor& a, const torch::Tensor& b) {
  check_same_shape(a, b, "correlation_coefficient");
  const auto da = a.flatten() - a.mean();
  const auto db = b.flatten() - b.mean();
  const auto saa = da.pow(2).sum();
  const auto sbb = db.pow(2).sum();
  Correlation c;
  {
    torch::NoGradGuard no_grad;
    c.degenerate = saa.item<double>() <= 0.0 || sbb.item<double>() <= 0.0;
  }
  if (c.degenerate) {
    c.value = torch::zeros({}, a.options());
    return c;
  }
  c.value = (da * db).sum() / torch::sqrt(saa * sbb);
  return c;
}

torch::Tensor corr_loss(const torch::Tensor& base_vis, const torch::Tensor& base_ir, const torch::Tensor& detail_vis,
                        const torch::Tensor& detail_ir, CorrMode mode) {
  const auto base = correlation_coefficient(base_vis, base_ir).value;
  const auto detail = correlation_coefficient(detail_vis, detail_ir).value;
  return mode == CorrMode::kLiteral ? base + detail : detail - base;
}

torch::Tensor infonce_loss(const torch::Tensor& x, const torch::Tensor& y, double temperature) {
  check_same_shape(x, y, "infonce_loss");
  if (x.dim() != 2) throw DimensionError("infonce_loss: expected (K, d) embeddings, got " + c10::str(x.sizes()));
  if (x.size(0) < 2) throw ValidationError("infonce_loss: need K >= 2 pairs to form negatives");
  if (!(temperature > 0.0)) throw ValidationError("infonce_loss: temperature must be positive");
  const auto logits = torch::matmul(x, y.transpose(0, 1)) / temperature;
  // -log softmax of the diagonal, averaged over rows.
  return -torch::log_softmax(logits, 1).diagonal().mean();
}

torch::Tensor mkmmd_loss(std::span<const torch::Tensor> taps_ir, std::span<const torch::Tensor> taps_vis,
                         const KernelConfig& kernel, std::mt19937_64& rng) {
  return mmd::mmd_from_feature_maps(taps_ir, taps_vis, kernel, rng);
}

LossReport stage1_loss(const torch::Tensor& ir, const torch::Tensor& vis_lum, const model::Reconstruction& rec,
                       const LossWeights& w, const KernelConfig& kernel, std::mt19937_64& rng) {
  auto r = recon_loss(ir, rec.ir_hat, vis_lum, rec.vis_hat, w);
  const auto recon = r.total;
  const auto corr = corr_loss(rec.vis.base, rec.ir.base, rec.vis.detail, rec.ir.detail, w.corr_mode);
  const auto mkmmd = mkmmd_loss(rec.ir.base_taps, rec.vis.base_taps, kernel, rng);
  torch::Tensor nce = torch::zeros({}, ir.options());
  if (ir.size(0) >= 2) {
    nce = infonce_loss(rec.ir.base.mean({2, 3}), rec.vis.base.mean({2, 3}), w.temperature);
  }
  r.add("recon", recon);
  r.add("corr", corr);
  r.add("mkmmd", mkmmd);
  r.add("infonce", nce);
  r.total = recon + w.beta1 * corr + w.beta2 * mkmmd + w.beta3 * nce;
  return r;
}

torch::Tensor intensity_loss(const torch::Tensor& vis_lum, const torch::Tensor& ir, const torch::Tensor& fused) {
  check_same_shape(vis_lum, ir, "intensity_loss");
  check_same_shape(vis_lum, fused, "intensity_loss");
  return (torch::maximum(vis_lum, ir) - fused).abs().mean();
}

torch::Tensor max_gradient_loss(const torch::Tensor& vis_lum, const torch::Tensor& ir, const torch::Tensor& fused) {
  check_same_shape(vis_lum, ir, "max_gradient_loss");
  check_same_shape(vis_lum, fused, "max_gradient_loss");
  const auto target = torch::maximum(sobel_magnitude(vis_lum), sobel_magnitude(ir));
  return (target - sobel_magnitude(fused)).abs().mean();
}

LossReport stage2_loss(const torch::Tensor& vis_lum, const torch::Tensor& ir, const torch::Tensor& fused,
                       const model::EncodedFeatures& ir_features, const model::EncodedFeatures& vis_features,
                       const LossWeights& w) {
  LossReport r;
  const auto in = intensity_loss(vis_lum, ir, fused);
  const auto grad = max_gradient_loss(vis_lum, ir, fused);
  const auto corr = corr_loss(vis_features.base, ir_features.base, vis_features.detail, ir_features.detail, w.corr_mode);
  r.add("intensity", in);
  r.add("max_grad", grad);
  r.add("corr", corr);
  r.total = in + w.gamma1 * grad + w.gamma2 * corr;
  return r;
}

}  // namespace daf::loss

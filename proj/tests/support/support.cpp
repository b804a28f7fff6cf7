#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace daf::testing {

double gradient_check(const std::function<torch::Tensor()>& scalar_fn, const std::vector<Probe>& probes, double step,
                      double floor) {
  std::vector<torch::Tensor> tensors;
  for (const auto& p : probes) {
    p.tensor.mutable_grad() = torch::Tensor();
    tensors.push_back(p.tensor);
  }
  scalar_fn().backward();
  std::vector<torch::Tensor> grads;
  for (const auto& t : tensors) grads.push_back(t.grad().defined() ? t.grad().clone() : torch::zeros_like(t));

  double worst = 0.0;
  torch::NoGradGuard no_grad;
  for (size_t k = 0; k < probes.size(); ++k) {
    auto flat = probes[k].tensor.view({-1});
    const int64_t i = probes[k].index;
    const double original = flat[i].item<double>();
    flat[i].fill_(original + step);
    const double up = scalar_fn().item<double>();
    flat[i].fill_(original - step);
    const double down = scalar_fn().item<double>();
    flat[i].fill_(original);
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = grads[k].reshape({-1})[i].item<double>();
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

double gradient_check(const std::function<torch::Tensor()>& scalar_fn, const std::vector<torch::Tensor>& inputs,
                      int64_t samples, std::mt19937_64& rng, double step, double floor) {
  std::vector<Probe> probes;
  for (const auto& t : inputs) {
    const int64_t n = t.numel();
    if (samples >= n) {
      for (int64_t i = 0; i < n; ++i) probes.push_back({t, i});
      continue;
    }
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    for (int64_t s = 0; s < samples; ++s) probes.push_back({t, pick(rng)});
  }
  return gradient_check(scalar_fn, probes, step, floor);
}

std::vector<Probe> parameter_probes(torch::nn::Module& module, int64_t count, std::mt19937_64& rng) {
  const auto params = module.parameters();
  int64_t total = 0;
  for (const auto& p : params) total += p.numel();
  std::uniform_int_distribution<int64_t> pick(0, total - 1);
  std::vector<Probe> probes;
  for (int64_t s = 0; s < count; ++s) {
    int64_t i = pick(rng);
    for (const auto& p : params) {
      if (i < p.numel()) {
        probes.push_back({p, i});
        break;
      }
      i -= p.numel();
    }
  }
  return probes;
}

void randomize_parameters(torch::nn::Module& module, double scale, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) p.copy_(at::normal(0.0, scale, p.sizes(), gen, p.options()));
}

torch::Tensor projected_sum(const torch::Tensor& out, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  const auto w = at::normal(0.0, 1.0, out.sizes(), gen, out.options().requires_grad(false));
  return (out * w).sum();
}

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / ("daf_" + tag + "_" + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace oracle {

static double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double gaussian(const std::vector<double>& a, const std::vector<double>& b, double tau) {
  return std::exp(-sq_distance(a, b) / (2.0 * tau * tau));
}

double laplacian(const std::vector<double>& a, const std::vector<double>& b, double tau) {
  return std::exp(-std::sqrt(sq_distance(a, b)) / tau);
}

double hybrid(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& gauss_tau,
              const std::vector<double>& lap_tau, double c1) {
  double g = 0.0, l = 0.0;
  for (double t : gauss_tau) g += gaussian(a, b, t) / static_cast<double>(gauss_tau.size());
  for (double t : lap_tau) l += laplacian(a, b, t) / static_cast<double>(lap_tau.size());
  return c1 * g + (1.0 - c1) * l;
}

double mmd(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
           const std::vector<double>& gauss_tau, const std::vector<double>& lap_tau, double c1) {
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (const auto& a : x)
    for (const auto& b : x) xx += hybrid(a, b, gauss_tau, lap_tau, c1);
  for (const auto& a : y)
    for (const auto& b : y) yy += hybrid(a, b, gauss_tau, lap_tau, c1);
  for (const auto& a : x)
    for (const auto& b : y) xy += hybrid(a, b, gauss_tau, lap_tau, c1);
  return xx / (n * n) + yy / (m * m) - 2.0 * xy / (n * m);
}

double entropy_u8(const cv::Mat& img) {
  std::vector<double> hist(256, 0.0);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) hist[img.at<uint8_t>(r, c)] += 1.0;
  const double total = static_cast<double>(img.total());
  double h = 0.0;
  for (double count : hist) {
    if (count == 0.0) continue;
    const double p = count / total;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n) {
  auto at = [&](int i, int j) -> double& { return a[static_cast<size_t>(i * n + j)]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-22) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace oracle

std::vector<std::vector<double>> to_rows(const torch::Tensor& t) {
  const auto d = t.to(torch::kDouble).contiguous();
  std::vector<std::vector<double>> rows(static_cast<size_t>(d.size(0)));
  for (int64_t i = 0; i < d.size(0); ++i) {
    const double* p = d[i].data_ptr<double>();
    rows[static_cast<size_t>(i)].assign(p, p + d.size(1));
  }
  return rows;
}

torch::Tensor from_rows(const std::vector<std::vector<double>>& rows) {
  auto t = torch::empty({static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows.front().size())}, torch::kDouble);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) t[static_cast<int64_t>(i)][static_cast<int64_t>(j)] = rows[i][j];
  return t;
}

}  // namespace daf::testing

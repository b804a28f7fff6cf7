#include "daf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "daf/errors.hpp"

namespace daf::mmd {
namespace {

constexpr double kSumTolerance = 1e-6;

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("kernel arguments differ in dimension: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

void check_weights(const std::vector<double>& w, const std::vector<double>& bw, const char* name) {
  if (w.size() != bw.size() || w.empty()) {
    throw ValidationError(std::string("kernel spec: ") + name + " weights and bandwidths must be non-empty and equal length");
  }
  for (double v : w) {
    if (!(v >= 0.0)) throw ValidationError(std::string("kernel spec: ") + name + " weights must be nonnegative");
  }
  for (double v : bw) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("kernel spec: ") + name + " bandwidths must be strictly positive");
    }
  }
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw ValidationError(std::string("kernel spec: ") + name + " weights must sum to 1");
  }
}

void check_sample_set(const torch::Tensor& s, const char* what) {
  if (s.dim() != 2) throw DimensionError(std::string(what) + ": expected an (n, d) sample set, got " + c10::str(s.sizes()));
  if (s.size(0) < 1) throw ValidationError(std::string(what) + ": sample set is empty");
}

double median(std::vector<double> values) {
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

void KernelSpec::validate() const {
  check_weights(gauss_weights, gauss_bandwidths, "gaussian");
  check_weights(lap_weights, lap_bandwidths, "laplacian");
  if (c1 < 0.0 || c2 < 0.0 || std::abs(c1 + c2 - 1.0) > kSumTolerance) {
    throw ValidationError("kernel spec: mix weights must be nonnegative and sum to 1");
  }
}

KernelSpec KernelSpec::uniform(std::vector<double> gauss_bandwidths, std::span<const double> lap_gammas, double c1) {
  KernelSpec spec;
  spec.gauss_weights.assign(gauss_bandwidths.size(), 1.0 / static_cast<double>(gauss_bandwidths.size()));
  spec.gauss_bandwidths = std::move(gauss_bandwidths);
  for (double g : lap_gammas) spec.lap_bandwidths.push_back(laplacian_bandwidth(g));
  spec.lap_weights.assign(lap_gammas.size(), 1.0 / static_cast<double>(lap_gammas.size()));
  spec.c1 = c1;
  spec.c2 = 1.0 - c1;
  spec.validate();
  return spec;
}

double laplacian_bandwidth(double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("laplacian gamma must be positive");
  return 1.0 / std::sqrt(2.0 * gamma);
}

double gaussian_multikernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
  const double d = euclidean(a, b);
  double k = 0.0;
  for (size_t j = 0; j < spec.gauss_weights.size(); ++j) {
    const double tau = spec.gauss_bandwidths[j];
    k += spec.gauss_weights[j] * std::exp(-d * d / (2.0 * tau * tau));
  }
  return k;
}

double laplacian_multikernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
  const double d = euclidean(a, b);
  double k = 0.0;
  for (size_t j = 0; j < spec.lap_weights.size(); ++j) k += spec.lap_weights[j] * std::exp(-d / spec.lap_bandwidths[j]);
  return k;
}

double hybrid_kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
  return spec.c1 * gaussian_multikernel(a, b, spec) + spec.c2 * laplacian_multikernel(a, b, spec);
}

torch::Tensor pairwise_distances(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.dim() != 2 || y.dim() != 2 || x.size(1) != y.size(1)) {
    throw DimensionError("pairwise_distances: incompatible sample sets " + c10::str(x.sizes()) + " and " +
                         c10::str(y.sizes()));
  }
  // compute_mode 2: never use the |x|^2 + |y|^2 - 2xy expansion.
  return torch::cdist(x, y, 2.0, /*compute_mode=*/2);
}

torch::Tensor gaussian_gram(const torch::Tensor& x, const torch::Tensor& y, const KernelSpec& spec) {
  const auto sq = pairwise_distances(x, y).pow(2);
  auto k = torch::zeros_like(sq);
  for (size_t j = 0; j < spec.gauss_weights.size(); ++j) {
    const double tau = spec.gauss_bandwidths[j];
    k = k + spec.gauss_weights[j] * torch::exp(-sq / (2.0 * tau * tau));
  }
  return k;
}

torch::Tensor laplacian_gram(const torch::Tensor& x, const torch::Tensor& y, const KernelSpec& spec) {
  const auto d = pairwise_distances(x, y);
  auto k = torch::zeros_like(d);
  for (size_t j = 0; j < spec.lap_weights.size(); ++j) k = k + spec.lap_weights[j] * torch::exp(-d / spec.lap_bandwidths[j]);
  return k;
}

torch::Tensor hybrid_gram(const torch::Tensor& x, const torch::Tensor& y, const KernelSpec& spec) {
  const auto d = pairwise_distances(x, y);
  const auto sq = d.pow(2);
  auto kg = torch::zeros_like(d);
  for (size_t j = 0; j < spec.gauss_weights.size(); ++j) {
    const double tau = spec.gauss_bandwidths[j];
    kg = kg + spec.gauss_weights[j] * torch::exp(-sq / (2.0 * tau * tau));
  }
  auto kl = torch::zeros_like(d);
  for (size_t j = 0; j < spec.lap_weights.size(); ++j) kl = kl + spec.lap_weights[j] * torch::exp(-d / spec.lap_bandwidths[j]);
  return spec.c1 * kg + spec.c2 * kl;
}

std::vector<double> median_heuristic_bandwidths(const torch::Tensor& pooled, int64_t k, std::mt19937_64& rng,
                                                int64_t max_pairs) {
  if (pooled.dim() != 2) throw DimensionError("median heuristic: expected (n, d) samples, got " + c10::str(pooled.sizes()));
  const int64_t n = pooled.size(0);
  if (n < 2) throw ValidationError("median heuristic: need at least 2 vectors, got " + std::to_string(n));
  if (k < 1) throw ValidationError("median heuristic: need at least one bandwidth");

  const auto samples = pooled.detach().to(torch::kDouble).contiguous();
  const auto acc = samples.accessor<double, 2>();
  const int64_t d = samples.size(1);
  auto distance = [&](int64_t i, int64_t j) {
    double s = 0.0;
    for (int64_t c = 0; c < d; ++c) s += (acc[i][c] - acc[j][c]) * (acc[i][c] - acc[j][c]);
    return std::sqrt(s);
  };

  std::vector<double> distances;
  const int64_t total_pairs = n * (n - 1) / 2;
  if (total_pairs <= max_pairs) {
    distances.reserve(static_cast<size_t>(total_pairs));
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = i + 1; j < n; ++j) distances.push_back(distance(i, j));
    }
  } else {
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    distances.reserve(static_cast<size_t>(max_pairs));
    while (static_cast<int64_t>(distances.size()) < max_pairs) {
      const int64_t i = pick(rng), j = pick(rng);
      if (i != j) distances.push_back(distance(i, j));
    }
  }

  double m = median(std::move(distances));
  if (!(m > 0.0) || !std::isfinite(m)) m = 1.0;
  std::vector<double> bandwidths;
  for (int64_t j = 1; j <= k; ++j) bandwidths.push_back(m * std::ldexp(1.0, static_cast<int>(j - 3)));
  return bandwidths;
}

std::vector<double> median_heuristic_bandwidths(const torch::Tensor& x, const torch::Tensor& y, int64_t k,
                                                std::mt19937_64& rng, int64_t max_pairs) {
  return median_heuristic_bandwidths(torch::cat({x, y}, 0), k, rng, max_pairs);
}

namespace {

// Weighted kernel sum S = sum_ij w_i w_j k(|z_i - z_j|^2) over the pooled
// sample set, with a hand-written backward. The forward pass keeps
// G_ij = w_i w_j dk/dsq, so dS/dz_i = 4 (rowsum(G)_i z_i - (G z)_i).
struct WeightedKernelSum : torch::autograd::Function<WeightedKernelSum> {
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& z, const torch::Tensor& w,
                               const KernelSpec* spec) {
    const int64_t n = z.size(0);
    const auto norms = z.pow(2).sum(1);
    auto sq = (norms.unsqueeze(1) + norms.unsqueeze(0) - 2.0 * z.mm(z.t())).clamp_min(0.0);
    sq.fill_diagonal_(0.0);
    sq = sq.contiguous();
    auto g = torch::empty_like(sq);
    const double* sq_p = sq.data_ptr<double>();
    const double* w_p = w.data_ptr<double>();
    double* g_p = g.data_ptr<double>();

    std::vector<double> gauss_a, gauss_c, lap_a, lap_c;
    for (size_t j = 0; j < spec->gauss_bandwidths.size(); ++j) {
      const double tau = spec->gauss_bandwidths[j];
      gauss_a.push_back(1.0 / (2.0 * tau * tau));
      gauss_c.push_back(spec->c1 * spec->gauss_weights[j]);
    }
    for (size_t j = 0; j < spec->lap_bandwidths.size(); ++j) {
      lap_a.push_back(1.0 / spec->lap_bandwidths[j]);
      lap_c.push_back(spec->c2 * spec->lap_weights[j]);
    }

    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (int64_t k = 0; k < n; ++k) {
        const double s = sq_p[i * n + k];
        const double d = std::sqrt(s);
        double value = 0.0, slope = 0.0;
        for (size_t j = 0; j < gauss_a.size(); ++j) {
          const double e = gauss_c[j] * std::exp(-gauss_a[j] * s);
          value += e;
          slope -= gauss_a[j] * e;
        }
        for (size_t j = 0; j < lap_a.size(); ++j) {
          const double e = lap_c[j] * std::exp(-lap_a[j] * d);
          value += e;
          // Not differentiable at coincident samples; take the zero subgradient.
          if (d > 0.0) slope -= lap_a[j] * e / (2.0 * d);
        }
        const double ww = w_p[i] * w_p[k];
        row += ww * value;
        g_p[i * n + k] = ww * slope;
      }
      total += row;
    }
    ctx->save_for_backward({z, g});
    return torch::full({}, total, z.options());
  }

  static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::variable_list grad_output) {
    const auto saved = ctx->get_saved_variables();
    const auto& z = saved[0];
    const auto& g = saved[1];
    const auto grad_z = 4.0 * (g.sum(1, true) * z - g.mm(z)) * grad_output[0];
    return {grad_z, torch::Tensor(), torch::Tensor()};
  }
};

}  // namespace

torch::Tensor mk_mmd(const torch::Tensor& ir, const torch::Tensor& vis, const KernelSpec& spec) {
  check_sample_set(ir, "mk_mmd infrared samples");
  check_sample_set(vis, "mk_mmd visible samples");
  if (ir.size(1) != vis.size(1)) {
    throw DimensionError("mk_mmd: sample dimensions differ: " + std::to_string(ir.size(1)) + " vs " +
                         std::to_string(vis.size(1)));
  }
  const int64_t n = ir.size(0), m = vis.size(0);
  const auto z = torch::cat({ir.to(torch::kDouble), vis.to(torch::kDouble)}, 0).contiguous();
  const auto w = torch::cat({torch::full({n}, 1.0 / static_cast<double>(n), z.options()),
                             torch::full({m}, -1.0 / static_cast<double>(m), z.options())});
  return WeightedKernelSum::apply(z, w, &spec).to(ir.scalar_type());
}

double mk_mmd_value(const torch::Tensor& ir, const torch::Tensor& vis, const KernelSpec& spec) {
  torch::NoGradGuard no_grad;
  return std::max(0.0, mk_mmd(ir, vis, spec).item<double>());
}

torch::Tensor sample_positions(int64_t h, int64_t w, int64_t n_positions, std::mt19937_64& rng) {
  const int64_t total = h * w;
  std::vector<int64_t> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  if (total > n_positions) {
    // Partial Fisher-Yates: the first n_positions entries become a uniform draw.
    for (int64_t i = 0; i < n_positions; ++i) {
      std::uniform_int_distribution<int64_t> pick(i, total - 1);
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(pick(rng))]);
    }
    idx.resize(static_cast<size_t>(n_positions));
  }
  return torch::tensor(idx, torch::kLong);
}

torch::Tensor gather_channel_vectors(const torch::Tensor& features, const torch::Tensor& positions) {
  if (features.dim() != 4) throw DimensionError("expected a (B, C, H, W) feature map, got " + c10::str(features.sizes()));
  const auto b = features.size(0), c = features.size(1);
  const auto flat = features.reshape({b, c, -1}).index_select(2, positions);  // (B, C, P)
  return flat.permute({0, 2, 1}).reshape({-1, c});
}

torch::Tensor mmd_from_feature_maps(std::span<const torch::Tensor> taps_ir, std::span<const torch::Tensor> taps_vis,
                                    const KernelSpec& spec, int64_t n_positions, std::mt19937_64& rng) {
  if (taps_ir.size() != taps_vis.size() || taps_ir.empty()) {
    throw DimensionError("mmd_from_feature_maps: tap counts differ or are zero");
  }
  torch::Tensor total;
  for (size_t t = 0; t < taps_ir.size(); ++t) {
    if (taps_ir[t].sizes() != taps_vis[t].sizes()) {
      throw DimensionError("mmd_from_feature_maps: tap " + std::to_string(t) + " shapes differ: " +
                           c10::str(taps_ir[t].sizes()) + " vs " + c10::str(taps_vis[t].sizes()));
    }
    const auto pos = sample_positions(taps_ir[t].size(2), taps_ir[t].size(3), n_positions, rng);
    const auto term = mk_mmd(gather_channel_vectors(taps_ir[t], pos), gather_channel_vectors(taps_vis[t], pos), spec);
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(taps_ir.size());
}

torch::Tensor mmd_from_feature_maps(std::span<const torch::Tensor> taps_ir, std::span<const torch::Tensor> taps_vis,
                                    const KernelConfig& config, std::mt19937_64& rng) {
  if (taps_ir.size() != taps_vis.size() || taps_ir.empty()) {
    throw DimensionError("mmd_from_feature_maps: tap counts differ or are zero");
  }
  torch::Tensor total;
  for (size_t t = 0; t < taps_ir.size(); ++t) {
    if (taps_ir[t].sizes() != taps_vis[t].sizes()) {
      throw DimensionError("mmd_from_feature_maps: tap " + std::to_string(t) + " shapes differ: " +
                           c10::str(taps_ir[t].sizes()) + " vs " + c10::str(taps_vis[t].sizes()));
    }
    const auto pos = sample_positions(taps_ir[t].size(2), taps_ir[t].size(3), config.n_positions, rng);
    const auto x = gather_channel_vectors(taps_ir[t], pos);
    const auto y = gather_channel_vectors(taps_vis[t], pos);
    const auto spec =
        KernelSpec::uniform(median_heuristic_bandwidths(x, y, config.gauss_k, rng), config.lap_gammas, config.mix_c1);
    const auto term = mk_mmd(x, y, spec);
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(taps_ir.size());
}

}  // namespace daf::mmd

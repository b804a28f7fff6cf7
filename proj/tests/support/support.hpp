#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace daf::testing {

/// Largest relative error between autograd and central differences over
/// `samples` randomly chosen coordinates of each tensor in `inputs`.
/// Inputs must be double tensors with requires_grad set. The error of a
/// coordinate is |a - n| / max(|a|, |n|, floor).
double gradient_check(const std::function<torch::Tensor()>& scalar_fn, const std::vector<torch::Tensor>& inputs,
                      int64_t samples, std::mt19937_64& rng, double step = 1e-6, double floor = 1e-6);

/// Same check over explicit (tensor, flat index) coordinates.
struct Probe {
  torch::Tensor tensor;
  int64_t index;
};
double gradient_check(const std::function<torch::Tensor()>& scalar_fn, const std::vector<Probe>& probes,
                      double step = 1e-6, double floor = 1e-6);

/// `count` scalar coordinates drawn uniformly over all entries of all
/// parameters of `module`.
std::vector<Probe> parameter_probes(torch::nn::Module& module, int64_t count, std::mt19937_64& rng);

/// Overwrites every parameter of `module` with N(0, scale^2) noise so that
/// zero-initialized layers carry generic values.
void randomize_parameters(torch::nn::Module& module, double scale, uint64_t seed);

/// Fixed random projection used as a scalar head: sum(out * weights).
torch::Tensor projected_sum(const torch::Tensor& out, uint64_t seed);

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

// Independent scalar oracles, written directly from the textbook formulas.
namespace oracle {

double gaussian(const std::vector<double>& a, const std::vector<double>& b, double tau);
double laplacian(const std::vector<double>& a, const std::vector<double>& b, double tau);

/// Hybrid kernel with uniform weights.
double hybrid(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& gauss_tau,
              const std::vector<double>& lap_tau, double c1);

/// Biased V-statistic MMD^2 by triple loop.
double mmd(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
           const std::vector<double>& gauss_tau, const std::vector<double>& lap_tau, double c1);

/// Shannon entropy (bits) of the 256-bin histogram of an 8-bit image.
double entropy_u8(const cv::Mat& img);

/// Symmetric Jacobi eigenvalues of a dense matrix (row major, n x n).
std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n);

}  // namespace oracle

std::vector<std::vector<double>> to_rows(const torch::Tensor& t);
torch::Tensor from_rows(const std::vector<std::vector<double>>& rows);

}  // namespace daf::testing

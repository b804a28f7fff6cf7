#include "daf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "daf/errors.hpp"
#include "daf/losses.hpp"

namespace daf::train {
namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw ValidationError("checkpoint carries a corrupt RNG state");
}

double global_grad_norm(const std::vector<torch::Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.grad().defined()) sq += p.grad().pow(2).sum().item<double>();
  }
  return std::sqrt(sq);
}

void set_lr(torch::optim::Adam& optimizer, double lr) {
  for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::string describe(const loss::LossReport& report) {
  std::ostringstream out;
  for (const auto& [name, value] : report.values()) out << ' ' << name << '=' << value;
  return out.str();
}

enum class Stage { kOne, kTwo };

/// Shared optimisation loop of both stages.
TrainResult run(Stage stage, std::span<const io::ImagePair> data, const Config& config, model::DafNet net,
                std::vector<torch::Tensor> trainable, const TrainHooks& hooks, const Checkpoint* resume) {
  config.validate();
  const auto& tc = config.train;
  if (data.empty()) throw ValidationError("training dataset is empty");
  check_patchable(data, tc.patch_size);

  torch::optim::Adam optimizer(trainable, torch::optim::AdamOptions(tc.lr0).betas({0.9, 0.999}).weight_decay(0.0));
  std::mt19937_64 rng(tc.seed);
  int64_t start_epoch = 0;
  int64_t iteration = 0;
  if (resume != nullptr) {
    if (!resume->optimizer_state.empty()) {
      torch::serialize::InputArchive archive;
      std::istringstream in(resume->optimizer_state);
      archive.load_from(in);
      optimizer.load(archive);
    }
    rng_from_string(rng, resume->rng_state);
    start_epoch = resume->epoch;
    iteration = resume->iteration;
  }

  const int64_t stage_tag = stage == Stage::kOne ? 1 : 2;
  auto snapshot = [&](int64_t epochs_done) {
    Checkpoint c;
    c.stage = stage_tag;
    c.epoch = epochs_done;
    c.iteration = iteration;
    c.config = config;
    c.config.train.stage = stage_tag;
    c.rng_state = rng_to_string(rng);
    c.model_state = serialize_module(*net);
    torch::serialize::OutputArchive archive;
    optimizer.save(archive);
    std::ostringstream out;
    archive.save_to(out);
    c.optimizer_state = out.str();
    return c;
  };

  TrainResult result;
  result.model = net;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<size_t>(tc.batch_size);
  bool stop = false;
  int64_t epochs_done = start_epoch;

  net->train();
  for (int64_t epoch = start_epoch; epoch < tc.epochs; ++epoch) {
    const double lr = lr_at(epoch, tc);
    set_lr(optimizer, lr);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    for (size_t first = 0; first < order.size(); first += batch) {
      const size_t count = std::min(batch, order.size() - first);
      const auto pb = sample_patch_batch(data, std::span(order).subspan(first, count), tc.patch_size, rng);
      const auto vis_lum = model::to_luminance(pb.vis_rgb);

      loss::LossReport report;
      if (stage == Stage::kOne) {
        const auto rec = net->forward_reconstruct(pb.ir, pb.vis_rgb);
        report = loss::stage1_loss(pb.ir, vis_lum, rec, config.loss, config.kernel, rng);
      } else {
        const auto out = net->forward_fuse_detailed(pb.ir, pb.vis_rgb);
        report = loss::stage2_loss(vis_lum, pb.ir, out.fused, out.ir, out.vis, config.loss);
      }

      const double total = report.total.item<double>();
      if (!std::isfinite(total)) {
        throw TrainingDivergence("non-finite stage-" + std::to_string(stage_tag) + " loss at iteration " +
                                 std::to_string(iteration) + " (epoch " + std::to_string(epoch) + "):" +
                                 describe(report) + "; last grad_norm=" +
                                 (result.history.rows.empty() ? std::string("n/a")
                                                              : std::to_string(result.history.rows.back().values.back())));
      }
      optimizer.zero_grad();
      report.total.backward();
      const double grad_norm = global_grad_norm(trainable);
      if (!std::isfinite(grad_norm)) {
        throw TrainingDivergence("non-finite gradient norm at iteration " + std::to_string(iteration) + " (epoch " +
                                 std::to_string(epoch) + "):" + describe(report));
      }
      if (tc.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(trainable, tc.grad_clip);
      optimizer.step();
      ++iteration;

      if (result.history.columns.empty()) {
        result.history.columns = report.names();
        result.history.columns.emplace_back("grad_norm");
      }
      HistoryRow row;
      row.iteration = iteration - 1;
      row.epoch = epoch;
      row.lr = lr;
      const auto values = report.values();
      for (const auto& name : report.names()) row.values.push_back(values.at(name));
      row.values.push_back(grad_norm);
      result.history.rows.push_back(std::move(row));
      if (hooks.on_iteration) hooks.on_iteration(result.history.rows.back(), result.history);

      if (tc.max_iterations > 0 && iteration >= tc.max_iterations) {
        stop = true;
        break;
      }
    }
    if (stop) break;
    epochs_done = epoch + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(snapshot(epochs_done));
  }
  net->eval();
  // A run cut short by max_iterations records only its fully completed epochs.
  result.checkpoint = snapshot(epochs_done);
  return result;
}

}  // namespace

double lr_at(int64_t epoch, const TrainConfig& config) {
  if (epoch < 0) throw ValidationError("lr_at: epoch must be nonnegative");
  return config.lr0 * std::pow(0.5, static_cast<double>(epoch / config.lr_halve_every));
}

void check_patchable(std::span<const io::ImagePair> data, int64_t patch) {
  for (const auto& pair : data) {
    if (pair.height() < patch || pair.width() < patch) {
      throw ValidationError("image '" + pair.source + "' (" + std::to_string(pair.width()) + "x" +
                            std::to_string(pair.height()) + ") is smaller than the " + std::to_string(patch) +
                            "-pixel training patch");
    }
  }
}

PatchBatch sample_patch_batch(std::span<const io::ImagePair> data, std::span<const size_t> indices, int64_t patch,
                              std::mt19937_64& rng) {
  PatchBatch b;
  std::vector<torch::Tensor> irs, viss;
  for (size_t idx : indices) {
    if (idx >= data.size()) throw std::out_of_range("patch batch index out of range");
    const auto& pair = data[idx];
    if (pair.height() < patch || pair.width() < patch) {
      throw ValidationError("image '" + pair.source + "' is smaller than the " + std::to_string(patch) +
                            "-pixel training patch");
    }
    std::uniform_int_distribution<int64_t> row(0, pair.height() - patch), col(0, pair.width() - patch);
    const int64_t r = row(rng);
    const int64_t c = col(rng);
    irs.push_back(pair.ir.narrow(1, r, patch).narrow(2, c, patch));
    viss.push_back(pair.vis_rgb.narrow(1, r, patch).narrow(2, c, patch));
    b.indices.push_back(idx);
    b.offsets.push_back({r, c});
  }
  b.ir = torch::stack(irs).contiguous();
  b.vis_rgb = torch::stack(viss).contiguous();
  return b;
}

std::vector<double> LossHistory::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("loss history has no column '" + name + "'");
  const auto k = static_cast<size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.values[k]);
  return out;
}

void LossHistory::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "iteration,epoch,lr";
  for (const auto& c : columns) out << ',' << c;
  out << '\n' << std::setprecision(9);
  for (const auto& row : rows) {
    out << row.iteration << ',' << row.epoch << ',' << row.lr;
    for (double v : row.values) out << ',' << v;
    out << '\n';
  }
}

TrainResult train_stage1(std::span<const io::ImagePair> data, const Config& config, const TrainHooks& hooks,
                         const Checkpoint* resume) {
  model::DafNet net{nullptr};
  if (resume != nullptr) {
    if (resume->stage != 1) throw ValidationError("stage-1 training cannot resume from a stage-2 checkpoint");
    net = restore_model(*resume);
  } else {
    net = model::make_model(config.model, config.train.seed);
  }
  auto trainable = net->encoder_parameters();
  for (auto& p : net->decoder_parameters()) trainable.push_back(p);
  for (auto& p : net->fusion_parameters()) p.set_requires_grad(false);
  return run(Stage::kOne, data, config, net, std::move(trainable), hooks, resume);
}

TrainResult train_stage2(std::span<const io::ImagePair> data, const Checkpoint& stage1, const Config& config,
                         const TrainHooks& hooks, const Checkpoint* resume) {
  if (stage1.stage != 1) {
    throw ValidationError("stage-2 training needs a stage-1 checkpoint, got stage " + std::to_string(stage1.stage));
  }
  if (resume != nullptr && resume->stage != 2) {
    throw ValidationError("stage-2 training can only resume from a stage-2 checkpoint");
  }
  // The architecture is fixed by stage I.
  Config effective = config;
  effective.model = stage1.config.model;
  auto net = restore_model(resume != nullptr ? *resume : stage1);
  std::vector<torch::Tensor> trainable = net->fusion_parameters();
  for (auto& p : net->decoder_parameters()) trainable.push_back(p);
  if (config.train.stage2_freeze_encoders) {
    for (auto& p : net->encoder_parameters()) p.set_requires_grad(false);
  } else {
    for (auto& p : net->encoder_parameters()) trainable.push_back(p);
  }
  return run(Stage::kTwo, data, effective, net, std::move(trainable), hooks, resume);
}

uint64_t parameter_hash(const std::vector<torch::Tensor>& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    const auto c = p.detach().contiguous();
    const auto* bytes = static_cast<const uint8_t*>(c.data_ptr());
    const auto n = static_cast<size_t>(c.numel()) * c.element_size();
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace daf::train

#include "daf/commands.hpp"

#include <cstdio>
#include <iostream>
#include <mutex>

#include <opencv2/imgcodecs.hpp>

#include "daf/checkpoint.hpp"
#include "daf/errors.hpp"
#include "daf/io.hpp"
#include "daf/synth.hpp"
#include "daf/trainer.hpp"
#include "parallel.hpp"

namespace daf::cli {
namespace {

std::string epoch_name(int stage, int64_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "stage%d_epoch%03lld.ckpt", stage, static_cast<long long>(epoch));
  return buf;
}

cv::Mat luminance_u8(const torch::Tensor& chw) { return io::to_mat_u8(chw); }

}  // namespace

void synth(const fs::path& out_dir, int n_pairs, uint64_t seed) { synth::write_dataset(out_dir, n_pairs, seed); }

fs::path train(int stage, const TrainOptions& options) {
  if (stage != 1 && stage != 2) throw ValidationError("stage must be 1 or 2");
  Config config = options.config ? load_config(*options.config) : Config{};
  if (options.seed) config.train.seed = *options.seed;
  config.train.stage = stage;
  config.validate();

  const auto manifest = io::scan_dataset(options.data);
  const auto pairs = io::load_dataset(manifest);
  fs::create_directories(options.out);

  train::TrainHooks hooks;
  hooks.on_epoch_end = [&](const Checkpoint& c) {
    if (c.epoch % config.train.checkpoint_every == 0) save_checkpoint(options.out / epoch_name(stage, c.epoch), c);
  };
  if (!options.quiet) {
    hooks.on_iteration = [](const train::HistoryRow& row, const train::LossHistory& history) {
      if (row.iteration % 10 != 0) return;
      std::cout << "iter " << row.iteration << " epoch " << row.epoch << " lr " << row.lr;
      for (size_t i = 0; i < history.columns.size(); ++i) std::cout << ' ' << history.columns[i] << '=' << row.values[i];
      std::cout << std::endl;
    };
  }

  train::TrainResult result;
  if (stage == 1) {
    std::optional<Checkpoint> resume;
    if (options.checkpoint) resume = load_checkpoint(*options.checkpoint);
    result = train::train_stage1(pairs, config, hooks, resume ? &*resume : nullptr);
  } else {
    if (!options.checkpoint) throw ValidationError("train-stage2 requires --checkpoint (a stage-1 checkpoint)");
    const auto stage1 = load_checkpoint(*options.checkpoint);
    if (stage1.stage != 1) {
      throw ValidationError("checkpoint '" + options.checkpoint->string() + "' is a stage-" +
                            std::to_string(stage1.stage) + " checkpoint; train-stage2 needs stage 1");
    }
    result = train::train_stage2(pairs, stage1, config, hooks);
  }

  const auto final_path = options.out / ("stage" + std::to_string(stage) + "_final.ckpt");
  save_checkpoint(final_path, result.checkpoint);
  result.history.write_csv(options.out / ("stage" + std::to_string(stage) + "_history.csv"));
  return final_path;
}

void fuse(const fs::path& checkpoint_path, const fs::path& data, const fs::path& out_dir) {
  const auto checkpoint = load_checkpoint(checkpoint_path);
  if (checkpoint.stage != 2) {
    throw ValidationError("checkpoint '" + checkpoint_path.string() + "' is a stage-" +
                          std::to_string(checkpoint.stage) + " checkpoint; fusing needs stage 2");
  }
  auto net = restore_model(checkpoint);
  const auto manifest = io::scan_dataset(data);
  fs::create_directories(out_dir);

  std::mutex log_mutex;
  const io::WarningSink warn = [&](const std::string& m) {
    std::lock_guard lock(log_mutex);
    io::log_warning(m);
  };
  detail::parallel_for(manifest.size(), [&](size_t i) {
    const auto pair = io::load_pair(manifest.ir_files[i], manifest.vis_files[i], warn);
    torch::Tensor fused;
    {
      torch::NoGradGuard no_grad;
      fused = net->forward_fuse(pair.ir.unsqueeze(0), pair.vis_rgb.unsqueeze(0))[0];
    }
    const auto chroma = io::rgb_to_luma_chroma(pair.vis_rgb);
    io::write_png(out_dir / (pair.id + "_fused.png"), io::luma_chroma_to_rgb(fused, chroma.cb, chroma.cr));
    io::write_png(out_dir / (pair.id + "_fused_y.png"), fused);
  });
}

metrics::EvaluationTable eval(const fs::path& data, const fs::path& fused_dir, const fs::path& out_csv) {
  const auto manifest = io::scan_dataset(data);
  std::vector<std::pair<std::string, metrics::MetricReport>> rows(manifest.size());
  detail::parallel_for(manifest.size(), [&](size_t i) {
    const auto pair = io::load_pair(manifest.ir_files[i], manifest.vis_files[i], [](const std::string&) {});
    fs::path fused_path = fused_dir / (pair.id + "_fused_y.png");
    if (!fs::exists(fused_path)) fused_path = fused_dir / (pair.id + "_fused.png");
    if (!fs::exists(fused_path)) {
      throw ValidationError("no fused image for '" + pair.id + "' in '" + fused_dir.string() + "'");
    }
    const cv::Mat fused = io::read_luminance_u8(fused_path);
    const cv::Mat ir = luminance_u8(pair.ir);
    const cv::Mat vis = luminance_u8(io::rgb_to_luma_chroma(pair.vis_rgb).y);
    if (fused.size() != ir.size()) {
      throw ValidationError("fused image '" + fused_path.string() + "' does not match the size of its sources");
    }
    rows[i] = {pair.id, metrics::evaluate(fused, ir, vis)};
  });
  auto table = metrics::summarize(std::move(rows));
  metrics::write_csv(out_csv, table);
  return table;
}

}  // namespace daf::cli

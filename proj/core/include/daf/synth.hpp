#pragma once

#include <cstdint>
#include <filesystem>

#include <opencv2/core.hpp>

namespace daf::synth {

inline constexpr int kSyntheticSize = 160;

/// One procedurally generated registered pair sharing object geometry.
struct SyntheticPair {
  cv::Mat ir;        // CV_8UC1
  cv::Mat vis_bgr;   // CV_8UC3
  cv::Mat objects;   // CV_8UC1 object mask (255 inside any object)
};

/// Deterministic in (seed, index): the same arguments render identical images.
SyntheticPair render_pair(uint64_t seed, uint64_t index, int size = kSyntheticSize);

/// Writes `n_pairs` pairs as <out>/ir/pair_NNN.png and <out>/vis/pair_NNN.png.
void write_dataset(const std::filesystem::path& out_dir, int n_pairs, uint64_t seed);

}  // namespace daf::synth

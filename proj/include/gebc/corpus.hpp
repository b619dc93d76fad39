#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gebc/tensor.hpp"

namespace gebc {

constexpr size_t kMaxFramesPerSide = 10;
constexpr size_t kTsnDim = 2048;
constexpr size_t kMaxCaptionTokens = 126;  // 128 minus control + end tokens

struct CaptionTriplet {
  std::string subject;
  std::string status_before;
  std::string status_after;
};

enum class Side { Before, Boundary, After };

struct BoundaryRecord {
  std::string video_id;
  std::string boundary_id;
  std::vector<std::string> frames_before;  // relative .rvtc paths
  std::string boundary_frame;
  std::vector<std::string> frames_after;
  std::vector<std::string> seg_masks;  // one per frame, before|boundary|after order
  std::string tsn_before_path;
  std::string tsn_after_path;
  CaptionTriplet captions;
  std::string base_dir;  // directory the relative paths resolve against

  size_t frame_count() const {
    return frames_before.size() + 1 + frames_after.size();
  }
  std::string resolve(const std::string& rel) const;
};

struct SynthConfig {
  int resolution = 32;
  int c_seg = 8;
  int n_shapes = 3;  // circle, square, triangle
  int min_before = 2;
  int max_before = 4;
  int min_after = 2;
  int max_after = 4;
};

// Deterministic function of (seed, config): repeated runs are byte-identical.
void synth_corpus(uint64_t seed, size_t n_records, const SynthConfig& config,
                  const std::string& out_dir);

std::vector<BoundaryRecord> load_manifest(const std::string& manifest_path);

struct SampledFrames {
  std::vector<std::string> frame_paths;
  std::vector<std::string> mask_paths;
  std::vector<Side> sides;
};

SampledFrames sample_frames(const BoundaryRecord& record,
                            size_t max_per_side = kMaxFramesPerSide);

// Uniform-stride subsampling: indices floor(i * n / max) for i in [0, max).
std::vector<size_t> stride_indices(size_t n, size_t max_count);

Tensor<uint8_t> load_frame(const std::string& path);
Tensor<int64_t> load_mask(const std::string& path);
Tensor<float> load_tsn(const std::string& path);

// Unique caption words across all records, sorted.
std::vector<std::string> corpus_words(const std::vector<BoundaryRecord>& records);

}  // namespace gebc

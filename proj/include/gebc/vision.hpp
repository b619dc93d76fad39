#pragma once

#include <string>
#include <vector>

#include "gebc/corpus.hpp"
#include "gebc/nn.hpp"

namespace gebc {

constexpr size_t kFrameSlots = 2 * kMaxFramesPerSide + 1;  // 21
constexpr size_t kBoundarySlot = kMaxFramesPerSide;        // 10

struct EncoderConfig {
  size_t d = 64;
  size_t patch = 4;
  size_t layers = 2;
  size_t heads = 4;
  size_t c_seg = 8;
  size_t resolution = 32;

  size_t patches_per_frame() const {
    return (resolution / patch) * (resolution / patch);
  }
  void validate() const {
    if (d % heads != 0) throw ConfigError("encoder: d not divisible by heads");
    if (resolution % patch != 0) {
      throw ConfigError("encoder: resolution not divisible by patch");
    }
  }
};

// Before-frames occupy slots ending at 9 (right-aligned), boundary is always
// slot 10, after-frames start at 11 (left-aligned).
inline std::vector<size_t> frame_slots(const std::vector<Side>& sides) {
  size_t n_bef = 0, n_aft = 0, n_bnd = 0;
  for (Side s : sides) {
    if (s == Side::Before) ++n_bef;
    else if (s == Side::After) ++n_aft;
    else ++n_bnd;
  }
  if (n_bnd != 1) throw DataError("frame_slots: exactly one boundary frame required");
  if (n_bef > kMaxFramesPerSide || n_aft > kMaxFramesPerSide) {
    throw DataError("frame_slots: too many frames on one side");
  }
  std::vector<size_t> slots;
  size_t bi = 0, ai = 0;
  for (Side s : sides) {
    if (s == Side::Before) {
      slots.push_back(kBoundarySlot - n_bef + bi++);
    } else if (s == Side::Boundary) {
      slots.push_back(kBoundarySlot);
    } else {
      slots.push_back(kBoundarySlot + 1 + ai++);
    }
  }
  return slots;
}

// Pixels [3,H,W] in [0,255] to per-patch rows [P, 3*patch*patch], scaled to
// [-1, 1]. Row-major over (patch_row, patch_col); within a patch, channel-major.
template <typename T>
Tensor<T> patchify_frame(const Tensor<uint8_t>& pixels, size_t patch) {
  if (pixels.dims.size() != 3 || pixels.dims[0] != 3 ||
      pixels.dims[1] != pixels.dims[2]) {
    throw DataError("frame must be [3,H,W] with H == W");
  }
  const size_t res = pixels.dims[1];
  if (res % patch != 0) throw DataError("frame resolution mismatch with patch size");
  const size_t np = res / patch;
  Tensor<T> out({np * np, 3 * patch * patch});
  for (size_t py = 0; py < np; ++py) {
    for (size_t px = 0; px < np; ++px) {
      T* row = &out.data[(py * np + px) * out.cols()];
      size_t k = 0;
      for (size_t ch = 0; ch < 3; ++ch) {
        for (size_t y = 0; y < patch; ++y) {
          for (size_t x = 0; x < patch; ++x) {
            const uint8_t v =
                pixels.data[(ch * res + py * patch + y) * res + px * patch + x];
            row[k++] = T(v) / T(127.5) - T(1);
          }
        }
      }
    }
  }
  return out;
}

// Mask [H,W] of class ids to one-hot per-patch rows [P, c_seg*patch*patch].
template <typename T>
Tensor<T> patchify_mask(const Tensor<int64_t>& mask, size_t patch, size_t c_seg) {
  if (mask.dims.size() != 2 || mask.dims[0] != mask.dims[1]) {
    throw DataError("mask must be [H,W] with H == W");
  }
  const size_t res = mask.dims[0];
  if (res % patch != 0) throw DataError("mask resolution mismatch with patch size");
  const size_t np = res / patch;
  Tensor<T> out({np * np, c_seg * patch * patch});
  for (size_t py = 0; py < np; ++py) {
    for (size_t px = 0; px < np; ++px) {
      T* row = &out.data[(py * np + px) * out.cols()];
      for (size_t y = 0; y < patch; ++y) {
        for (size_t x = 0; x < patch; ++x) {
          const int64_t cid =
              mask.data[(py * patch + y) * res + px * patch + x];
          if (cid < 0 || size_t(cid) >= c_seg) {
            throw DataError("segmentation class id " + std::to_string(cid) +
                            " outside [0, " + std::to_string(c_seg) + ")");
          }
          row[size_t(cid) * patch * patch + y * patch + x] = T(1);
        }
      }
    }
  }
  return out;
}

template <typename T>
struct FrameOutput {
  int patch_tokens;  // [P, d]
  int cls;           // [1, d]
};

// Tape-level frame features for one record.
template <typename T>
struct FrameFeaturesT {
  std::vector<int> patch_tokens;  // per frame, [P, d]
  int cls_all = -1;               // [N_f, d]
  std::vector<size_t> slots;
};

template <typename T>
struct VisionEncoder {
  EncoderConfig cfg;
  Linear<T> patch_embed;          // [d, 3*patch^2]
  Param<T>* cls_token = nullptr;  // [1, d]
  Param<T>* pos_embed = nullptr;  // [1+P, d]
  std::vector<TransformerBlock<T>> blocks;
  LayerNormParams<T> ln_final;
  Linear<T> seg_embed;            // [d, c_seg*patch^2], independent patch embedding
  Param<T>* frame_pos = nullptr;  // E_p, [21, d]

  static VisionEncoder build(ParamStore<T>& store, const EncoderConfig& cfg,
                             Rng& rng) {
    cfg.validate();
    VisionEncoder enc;
    enc.cfg = cfg;
    const size_t p2 = cfg.patch * cfg.patch;
    enc.patch_embed = make_linear(store, "vision.patch_embed", cfg.d, 3 * p2, rng);
    enc.cls_token = make_embedding(store, "vision.cls_token", 1, cfg.d, rng);
    enc.pos_embed = make_embedding(store, "vision.pos_embed",
                                   1 + cfg.patches_per_frame(), cfg.d, rng);
    for (size_t l = 0; l < cfg.layers; ++l) {
      enc.blocks.push_back(make_block(store, "vision.L" + std::to_string(l),
                                      cfg.d, cfg.heads, false, false, rng));
    }
    enc.ln_final = make_layernorm(store, "vision.ln_final", cfg.d);
    enc.seg_embed =
        make_linear(store, "vision.seg.embed", cfg.d, cfg.c_seg * p2, rng);
    enc.frame_pos = make_embedding(store, "vision.frame_pos", kFrameSlots, cfg.d, rng);
    return enc;
  }

  FrameOutput<T> encode_frame(Tape<T>& t, const Tensor<uint8_t>& pixels,
                              const DropCtx* dc = nullptr) const {
    if (pixels.dims.size() != 3 || pixels.dims[1] != cfg.resolution ||
        pixels.dims[2] != cfg.resolution) {
      throw DataError("encode_frame: resolution mismatch");
    }
    const int patches = t.input(patchify_frame<T>(pixels, cfg.patch));
    const int proj = patch_embed.forward(t, patches, dc);
    const int tokens =
        t.add(t.concat_rows({t.param(cls_token), proj}), t.param(pos_embed));
    int h = tokens;
    for (const auto& blk : blocks) h = blk.forward(t, h, -1, dc);
    h = ln_final.forward(t, h);
    FrameOutput<T> out;
    out.cls = t.slice_rows(h, 0, 1);
    out.patch_tokens = t.slice_rows(h, 1, cfg.patches_per_frame());
    return out;
  }

  int embed_segmentation(Tape<T>& t, const Tensor<int64_t>& mask,
                         const DropCtx* dc = nullptr) const {
    if (mask.dims.size() != 2 || mask.dims[0] != cfg.resolution ||
        mask.dims[1] != cfg.resolution) {
      throw DataError("embed_segmentation: resolution mismatch");
    }
    const int onehot = t.input(patchify_mask<T>(mask, cfg.patch, cfg.c_seg));
    return seg_embed.forward(t, onehot, dc);
  }

  // Per slot i: patch_tokens_i = encode_frame + embed_segmentation + E_p[slot];
  // cls_i = frame CLS + E_p[slot].
  FrameFeaturesT<T> encode_record(Tape<T>& t,
                                  const std::vector<Tensor<uint8_t>>& frames,
                                  const std::vector<Tensor<int64_t>>& masks,
                                  const std::vector<Side>& sides,
                                  const DropCtx* dc = nullptr) const {
    if (frames.size() != masks.size() || frames.size() != sides.size()) {
      throw DataError("encode_record: frames/masks/sides misaligned");
    }
    if (frames.size() > kFrameSlots) throw DataError("encode_record: too many frames");
    FrameFeaturesT<T> out;
    out.slots = frame_slots(sides);
    const int ep = t.param(frame_pos);
    std::vector<int> cls_rows;
    for (size_t i = 0; i < frames.size(); ++i) {
      const FrameOutput<T> f = encode_frame(t, frames[i], dc);
      const int seg = embed_segmentation(t, masks[i], dc);
      const int ep_row = t.slice_rows(ep, out.slots[i], 1);
      out.patch_tokens.push_back(
          t.add_rowvec(t.add(f.patch_tokens, seg), ep_row));
      cls_rows.push_back(t.add(f.cls, ep_row));
    }
    out.cls_all = t.concat_rows(cls_rows);
    return out;
  }
};

}  // namespace gebc

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gebc/fusion.hpp"
#include "gebc/lora.hpp"
#include "gebc/serialization.hpp"
#include "gebc/text.hpp"
#include "gebc/vision.hpp"

namespace gebc {

// One record's tensors, loaded and frame-sampled, ready for the encoders.
struct RecordInput {
  std::string video_id;
  std::string boundary_id;
  std::vector<Tensor<uint8_t>> frames;
  std::vector<Tensor<int64_t>> masks;
  std::vector<Side> sides;
  Tensor<float> tsn_before;
  Tensor<float> tsn_after;
  CaptionTriplet captions;
};

inline RecordInput load_record_input(const BoundaryRecord& rec,
                                     size_t max_per_side = kMaxFramesPerSide) {
  const SampledFrames s = sample_frames(rec, max_per_side);
  RecordInput in;
  in.video_id = rec.video_id;
  in.boundary_id = rec.boundary_id;
  for (size_t i = 0; i < s.frame_paths.size(); ++i) {
    in.frames.push_back(load_frame(rec.resolve(s.frame_paths[i])));
    in.masks.push_back(load_mask(rec.resolve(s.mask_paths[i])));
  }
  in.sides = s.sides;
  in.tsn_before = load_tsn(rec.resolve(rec.tsn_before_path));
  in.tsn_after = load_tsn(rec.resolve(rec.tsn_after_path));
  in.captions = rec.captions;
  return in;
}

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  FusionConfig fusion;
  LoraConfig lora;
  double temperature_init = 0.07;
};

template <typename T>
struct Model {
  ModelConfig cfg;
  Vocab vocab;
  ParamStore<T> store;
  VisionEncoder<T> vision;
  TemporalFusion<T> fusion;
  TextDecoder<T> uni;
  TextDecoder<T> multi;
  Param<T>* temperature = nullptr;
  std::vector<std::unique_ptr<LoraAdapter<T>>> adapters;

  static std::unique_ptr<Model> build(ModelConfig cfg, Vocab vocab,
                                      uint64_t seed) {
    cfg.decoder.vocab_size = vocab.size();
    auto m = std::make_unique<Model>();
    m->cfg = cfg;
    m->vocab = std::move(vocab);
    Rng rng(splitmix64(seed ^ 0x4d0de1ull));
    m->vision = VisionEncoder<T>::build(m->store, cfg.encoder, rng);
    m->fusion = TemporalFusion<T>::build(m->store, cfg.fusion, cfg.encoder.d, rng);
    m->uni = TextDecoder<T>::build(m->store, "uni", cfg.decoder, false, rng);
    m->multi = TextDecoder<T>::build(m->store, "multi", cfg.decoder, true, rng);
    m->temperature = m->store.create("contrastive.temperature", 1, 1);
    m->temperature->value.data[0] = T(cfg.temperature_init);
    if (cfg.lora.enabled) {
      m->adapters = attach_lora(m->store, m->vision, cfg.lora, rng);
    }
    return m;
  }

  FusedContextT<T> forward_context(Tape<T>& t, const RecordInput& in,
                                   const DropCtx* dc = nullptr) const {
    const FrameFeaturesT<T> feats =
        vision.encode_record(t, in.frames, in.masks, in.sides, dc);
    return fusion.fuse(t, feats, in.sides, in.tsn_before, in.tsn_after);
  }

  void merge_lora_all() {
    struct Site {
      Linear<T>* lin;
    };
    size_t idx = 0;
    for (auto& blk : vision.blocks) {
      for (Linear<T>* lin : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) {
        if (idx >= adapters.size()) break;
        merge_adapter(*adapters[idx++], lin->W);
      }
    }
  }

  NamedTensorMap to_checkpoint(const std::string& meta_json) const {
    NamedTensorMap map;
    for (const auto& p : store.items()) {
      map.add(p->name, TensorBlob::from_f32(cast<float>(p->value)));
    }
    map.meta = meta_json;
    return map;
  }

  void load_values(const NamedTensorMap& map) {
    for (const auto& p : store.items()) {
      const TensorBlob* blob = map.find(p->name);
      if (!blob) throw DataError("checkpoint missing tensor: " + p->name);
      const Tensor<float> t = blob->to_f32();
      if (t.numel() != p->value.numel()) {
        throw DataError("checkpoint shape mismatch for " + p->name);
      }
      for (size_t i = 0; i < t.data.size(); ++i) {
        p->value.data[i] = T(t.data[i]);
      }
    }
  }
};

}  // namespace gebc

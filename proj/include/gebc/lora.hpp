#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gebc/nn.hpp"
#include "gebc/vision.hpp"

namespace gebc {

struct LoraConfig {
  bool enabled = true;
  size_t rank = 8;
  double alpha = 8.0;
  double dropout = 0.1;
};

template <typename T>
std::unique_ptr<LoraAdapter<T>> make_adapter(ParamStore<T>& store,
                                             const std::string& name,
                                             size_t d_out, size_t d_in,
                                             const LoraConfig& cfg, Rng& rng) {
  if (cfg.rank < 1) throw ConfigError("lora: rank must be >= 1");
  auto a = std::make_unique<LoraAdapter<T>>();
  a->rank = cfg.rank;
  a->alpha = cfg.alpha;
  a->dropout_p = cfg.dropout;
  a->A = store.create(name + ".A", cfg.rank, d_in);
  for (T& v : a->A->value.data) v = T(rng.normal(0.0, 0.02));
  a->B = store.create(name + ".B", d_out, cfg.rank);  // zero-init: transparent
  return a;
}

// Adapters on every attention Q, K, V and output projection of the vision
// encoder; those base weight matrices are frozen, everything else trains.
template <typename T>
std::vector<std::unique_ptr<LoraAdapter<T>>> attach_lora(
    ParamStore<T>& store, VisionEncoder<T>& encoder, const LoraConfig& cfg,
    Rng& rng) {
  std::vector<std::unique_ptr<LoraAdapter<T>>> adapters;
  for (size_t l = 0; l < encoder.blocks.size(); ++l) {
    auto& blk = encoder.blocks[l];
    const std::string prefix = "lora.vision.L" + std::to_string(l);
    struct Site {
      Linear<T>* lin;
      const char* tag;
    } sites[] = {{&blk.wq, "q"}, {&blk.wk, "k"}, {&blk.wv, "v"}, {&blk.wo, "o"}};
    for (auto& s : sites) {
      if (s.lin->lora) throw ConfigError("lora: double attachment");
      auto a = make_adapter(store, prefix + "." + s.tag, s.lin->W->value.rows(),
                            s.lin->W->value.cols(), cfg, rng);
      s.lin->lora = a.get();
      s.lin->W->trainable = false;
      adapters.push_back(std::move(a));
    }
  }
  return adapters;
}

// W' = W + (alpha/r) * B * A. Marks the adapter merged; merging twice is
// rejected. After the merge Linear::forward skips the adapter path.
template <typename T>
void merge_adapter(LoraAdapter<T>& adapter, Param<T>* w) {
  if (adapter.merged) throw ConfigError("lora: adapter already merged");
  const size_t d_out = w->value.rows(), d_in = w->value.cols();
  const size_t r = adapter.rank;
  Tensor<T> ba({d_out, d_in});
  kernels::gemm_nn(ba.data.data(), adapter.B->value.data.data(),
                   adapter.A->value.data.data(), d_out, r, d_in);
  const T s = adapter.scale();
  for (size_t i = 0; i < ba.data.size(); ++i) w->value.data[i] += s * ba.data[i];
  adapter.merged = true;
}

}  // namespace gebc

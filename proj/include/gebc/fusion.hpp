#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gebc/nn.hpp"
#include "gebc/vision.hpp"

namespace gebc {

struct FusionConfig {
  size_t n_queries = 16;
  size_t heads = 4;
};

// TPD index pairs over CLS rows: all (before, after) pairs before-major,
// then (before, boundary) in temporal order, then (boundary, after).
inline std::vector<std::pair<size_t, size_t>> tpd_pairs(
    const std::vector<Side>& sides) {
  std::vector<size_t> before, after;
  size_t boundary = size_t(-1);
  for (size_t i = 0; i < sides.size(); ++i) {
    if (sides[i] == Side::Before) before.push_back(i);
    else if (sides[i] == Side::After) after.push_back(i);
    else if (boundary != size_t(-1)) throw DataError("tpd: multiple boundary frames");
    else boundary = i;
  }
  if (boundary == size_t(-1)) throw DataError("tpd: no boundary frame");
  if (before.empty() || after.empty()) {
    throw DataError("tpd: degenerate record with empty before or after side");
  }
  std::vector<std::pair<size_t, size_t>> pairs;
  pairs.reserve(before.size() * after.size() + before.size() + after.size());
  for (size_t i : before) {
    for (size_t j : after) pairs.emplace_back(i, j);
  }
  for (size_t i : before) pairs.emplace_back(i, boundary);
  for (size_t j : after) pairs.emplace_back(boundary, j);
  return pairs;
}

inline size_t tpd_count(size_t n_bef, size_t n_aft) {
  return n_bef * n_aft + n_bef + n_aft;
}

// Eq. 2: arithmetic mean of per-frame CLS rows.
template <typename T>
int average_cls(Tape<T>& t, int cls_all) {
  return t.mean_rows(cls_all);
}

template <typename T>
int compute_tpd(Tape<T>& t, int cls_all, const std::vector<Side>& sides) {
  if (t.val(cls_all).rows() != sides.size()) {
    throw DataError("compute_tpd: cls rows / side labels misaligned");
  }
  return t.pair_diff(cls_all, tpd_pairs(sides));
}

// Learned queries cross-attend over a token set; layer norm on top.
template <typename T>
struct AttnPool {
  size_t heads = 4;
  Param<T>* queries = nullptr;  // [n_q, d]
  Linear<T> wk, wv, wo;
  LayerNormParams<T> ln;

  static AttnPool build(ParamStore<T>& store, const std::string& prefix,
                        size_t n_q, size_t d, size_t heads, Rng& rng) {
    if (d % heads != 0) throw ConfigError("attn_pool: d not divisible by heads");
    AttnPool p;
    p.heads = heads;
    p.queries = make_embedding(store, prefix + ".queries", n_q, d, rng);
    p.wk = make_linear(store, prefix + ".k", d, d, rng);
    p.wv = make_linear(store, prefix + ".v", d, d, rng);
    p.wo = make_linear(store, prefix + ".o", d, d, rng);
    p.ln = make_layernorm(store, prefix + ".ln", d);
    return p;
  }

  int forward_prenorm(Tape<T>& t, int tokens) const {
    if (t.val(tokens).rows() == 0) throw DataError("attn_pool: empty token set");
    const int att = t.mha(t.param(queries), wk.forward(t, tokens),
                          wv.forward(t, tokens), heads, false);
    return wo.forward(t, att);
  }

  int forward(Tape<T>& t, int tokens) const {
    return ln.forward(t, forward_prenorm(t, tokens));
  }
};

template <typename T>
struct FusedContextT {
  int tokens = -1;      // [T_ctx, d]
  int pooled_cls = -1;  // [1, d]
};

template <typename T>
struct TemporalFusion {
  FusionConfig cfg;
  AttnPool<T> pool_frames;
  AttnPool<T> pool_tpd;
  Linear<T> tsn_proj;  // [d, 2048], shared across before/after

  static TemporalFusion build(ParamStore<T>& store, const FusionConfig& cfg,
                              size_t d, Rng& rng) {
    TemporalFusion f;
    f.cfg = cfg;
    f.pool_frames = AttnPool<T>::build(store, "pool_frames", cfg.n_queries, d,
                                       cfg.heads, rng);
    f.pool_tpd =
        AttnPool<T>::build(store, "pool_tpd", cfg.n_queries, d, cfg.heads, rng);
    f.tsn_proj = make_linear(store, "tsn_proj", d, kTsnDim, rng);
    return f;
  }

  int project_tsn(Tape<T>& t, const Tensor<float>& before,
                  const Tensor<float>& after) const {
    if (before.numel() != kTsnDim || after.numel() != kTsnDim) {
      throw DataError("project_tsn: TSN vectors must have length 2048");
    }
    Tensor<T> stacked({2, kTsnDim});
    for (size_t j = 0; j < kTsnDim; ++j) {
      stacked.data[j] = T(before.data[j]);
      stacked.data[kTsnDim + j] = T(after.data[j]);
    }
    return tsn_proj.forward(t, t.input(std::move(stacked)));
  }

  // tokens = [pooled frame patches, pooled TPD, projected TSN pair].
  FusedContextT<T> fuse(Tape<T>& t, const FrameFeaturesT<T>& feats,
                        const std::vector<Side>& sides,
                        const Tensor<float>& tsn_before,
                        const Tensor<float>& tsn_after) const {
    const int flat = t.concat_rows(feats.patch_tokens);
    const int pooled_f = pool_frames.forward(t, flat);
    const int tpd = compute_tpd(t, feats.cls_all, sides);
    const int pooled_t = pool_tpd.forward(t, tpd);
    const int tsn = project_tsn(t, tsn_before, tsn_after);
    FusedContextT<T> out;
    out.tokens = t.concat_rows({pooled_f, pooled_t, tsn});
    out.pooled_cls = average_cls(t, feats.cls_all);
    return out;
  }
};

}  // namespace gebc

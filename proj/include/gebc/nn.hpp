#pragma once

#include <string>

#include "gebc/autograd.hpp"
#include "gebc/rng.hpp"

namespace gebc {

// Threaded through forwards so dropout is active only during training and
// draws from the training loop's seeded stream.
struct DropCtx {
  bool training = false;
  Rng* rng = nullptr;
};

// Low-rank adapter on one linear site: y += (alpha/r) * B (A dropout(x)).
// B starts at zero so an attached adapter is exactly transparent.
template <typename T>
struct LoraAdapter {
  Param<T>* A = nullptr;  // [r, d_in]
  Param<T>* B = nullptr;  // [d_out, r]
  double alpha = 8.0;
  size_t rank = 8;
  double dropout_p = 0.1;
  bool merged = false;

  T scale() const { return T(alpha / double(rank)); }
};

template <typename T>
struct Linear {
  Param<T>* W = nullptr;  // [out, in]
  Param<T>* b = nullptr;  // [1, out], optional
  LoraAdapter<T>* lora = nullptr;

  int forward(Tape<T>& t, int x, const DropCtx* dc = nullptr) const {
    int y = t.matmul_nt(x, t.param(W));
    if (b) y = t.add_rowvec(y, t.param(b));
    if (lora && !lora->merged) {
      int xin = x;
      if (dc && dc->training && lora->dropout_p > 0.0) {
        xin = t.dropout(x, lora->dropout_p, *dc->rng);
      }
      const int u = t.matmul_nt(xin, t.param(lora->A));
      const int v = t.matmul_nt(u, t.param(lora->B));
      y = t.add(y, t.scale(v, lora->scale()));
    }
    return y;
  }
};

template <typename T>
struct LayerNormParams {
  Param<T>* gamma = nullptr;  // [1, d]
  Param<T>* beta = nullptr;   // [1, d]

  int forward(Tape<T>& t, int x) const {
    return t.layernorm(x, t.param(gamma), t.param(beta));
  }
};

template <typename T>
Linear<T> make_linear(ParamStore<T>& store, const std::string& name, size_t out,
                      size_t in, Rng& rng, double std_dev = 0.02,
                      bool bias = true) {
  Linear<T> l;
  l.W = store.create(name + ".W", out, in);
  for (T& v : l.W->value.data) v = T(rng.normal(0.0, std_dev));
  if (bias) l.b = store.create(name + ".b", 1, out);
  return l;
}

template <typename T>
LayerNormParams<T> make_layernorm(ParamStore<T>& store, const std::string& name,
                                  size_t d) {
  LayerNormParams<T> ln;
  ln.gamma = store.create(name + ".gamma", 1, d);
  ln.gamma->value.fill(T(1));
  ln.beta = store.create(name + ".beta", 1, d);
  return ln;
}

template <typename T>
Param<T>* make_embedding(ParamStore<T>& store, const std::string& name,
                         size_t rows, size_t d, Rng& rng,
                         double std_dev = 0.02) {
  Param<T>* p = store.create(name, rows, d);
  for (T& v : p->value.data) v = T(rng.normal(0.0, std_dev));
  return p;
}

// Pre-norm transformer block: self-attention (optionally causal), optional
// cross-attention over a context, then a GELU MLP. Residual throughout.
template <typename T>
struct TransformerBlock {
  size_t heads = 4;
  bool causal = false;
  bool has_cross = false;
  LayerNormParams<T> ln1, ln2;
  Linear<T> wq, wk, wv, wo;
  LayerNormParams<T> ln_cross;
  Linear<T> cq, ck, cv, co;
  Linear<T> mlp_in, mlp_out;

  int forward(Tape<T>& t, int x, int ctx = -1, const DropCtx* dc = nullptr) const {
    const int h1 = ln1.forward(t, x);
    const int att = t.mha(wq.forward(t, h1, dc), wk.forward(t, h1, dc),
                          wv.forward(t, h1, dc), heads, causal);
    int h = t.add(x, wo.forward(t, att, dc));
    if (has_cross) {
      if (ctx < 0) throw NumericError("transformer block: missing cross context");
      const int hq = ln_cross.forward(t, h);
      const int catt = t.mha(cq.forward(t, hq, dc), ck.forward(t, ctx, dc),
                             cv.forward(t, ctx, dc), heads, false);
      h = t.add(h, co.forward(t, catt, dc));
    }
    const int h2 = ln2.forward(t, h);
    const int m = mlp_out.forward(t, t.gelu(mlp_in.forward(t, h2, dc)), dc);
    return t.add(h, m);
  }
};

template <typename T>
TransformerBlock<T> make_block(ParamStore<T>& store, const std::string& name,
                               size_t d, size_t heads, bool causal,
                               bool has_cross, Rng& rng) {
  TransformerBlock<T> blk;
  blk.heads = heads;
  blk.causal = causal;
  blk.has_cross = has_cross;
  blk.ln1 = make_layernorm(store, name + ".ln1", d);
  blk.wq = make_linear(store, name + ".q", d, d, rng);
  blk.wk = make_linear(store, name + ".k", d, d, rng);
  blk.wv = make_linear(store, name + ".v", d, d, rng);
  blk.wo = make_linear(store, name + ".o", d, d, rng);
  if (has_cross) {
    blk.ln_cross = make_layernorm(store, name + ".lnc", d);
    blk.cq = make_linear(store, name + ".cq", d, d, rng);
    blk.ck = make_linear(store, name + ".ck", d, d, rng);
    blk.cv = make_linear(store, name + ".cv", d, d, rng);
    blk.co = make_linear(store, name + ".co", d, d, rng);
  }
  blk.ln2 = make_layernorm(store, name + ".ln2", d);
  blk.mlp_in = make_linear(store, name + ".mlp_in", 4 * d, d, rng);
  blk.mlp_out = make_linear(store, name + ".mlp_out", d, 4 * d, rng);
  return blk;
}

}  // namespace gebc

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gebc/corpus.hpp"
#include "gebc/nn.hpp"

namespace gebc {

constexpr int64_t kPad = 0;
constexpr int64_t kBos = 1;
constexpr int64_t kEos = 2;
constexpr int64_t kClsTxt = 3;
constexpr int64_t kSubj = 4;
constexpr int64_t kBef = 5;
constexpr int64_t kAft = 6;
constexpr int64_t kUnk = 7;
constexpr size_t kNumSpecials = 8;
constexpr size_t kMaxSeqLen = 128;

enum class CaptionType { Subject = 0, Before = 1, After = 2 };

inline int64_t type_token(CaptionType t) {
  switch (t) {
    case CaptionType::Subject: return kSubj;
    case CaptionType::Before: return kBef;
    case CaptionType::After: return kAft;
  }
  throw ConfigError("bad caption type");
}

struct Vocab {
  std::map<std::string, int64_t> token_to_id;
  std::vector<std::string> id_to_token;  // dense, includes specials

  static Vocab build(const std::vector<std::string>& words);
  static Vocab from_json(const std::string& json_text);
  std::string to_json() const;

  size_t size() const { return id_to_token.size(); }
  int64_t id(const std::string& token) const;
};

// Lowercase whitespace tokenization with UNK fallback; no control tokens.
std::vector<int64_t> tokenize(const std::string& text, const Vocab& vocab);
std::string detokenize(const std::vector<int64_t>& ids, const Vocab& vocab);

// [type control] + BOS + tokens + EOS, truncated to 128 preserving EOS.
std::vector<int64_t> build_target(const CaptionTriplet& captions,
                                  CaptionType type, const Vocab& vocab);

struct DecoderConfig {
  size_t d = 64;
  size_t layers = 2;
  size_t heads = 4;
  size_t vocab_size = 0;
  size_t max_len = kMaxSeqLen;

  void validate() const {
    if (d % heads != 0) throw ConfigError("decoder: d not divisible by heads");
    if (vocab_size < 16) throw ConfigError("decoder: vocab size must be >= 16");
  }
};

template <typename T>
struct TextDecoder {
  DecoderConfig cfg;
  bool multimodal = false;
  Param<T>* tok_embed = nullptr;  // [V, d]
  Param<T>* pos_embed = nullptr;  // [max_len + 1, d] (+1 for appended CLS_TXT)
  std::vector<TransformerBlock<T>> blocks;
  LayerNormParams<T> ln_final;
  Linear<T> head;  // [V, d], multimodal only

  static TextDecoder build(ParamStore<T>& store, const std::string& prefix,
                           const DecoderConfig& cfg, bool multimodal, Rng& rng) {
    cfg.validate();
    TextDecoder dec;
    dec.cfg = cfg;
    dec.multimodal = multimodal;
    dec.tok_embed =
        make_embedding(store, prefix + ".tok_embed", cfg.vocab_size, cfg.d, rng);
    dec.pos_embed =
        make_embedding(store, prefix + ".pos_embed", cfg.max_len + 1, cfg.d, rng);
    for (size_t l = 0; l < cfg.layers; ++l) {
      dec.blocks.push_back(make_block(store, prefix + ".L" + std::to_string(l),
                                      cfg.d, cfg.heads, true, multimodal, rng));
    }
    dec.ln_final = make_layernorm(store, prefix + ".ln_final", cfg.d);
    if (multimodal) {
      dec.head = make_linear(store, prefix + ".head", cfg.vocab_size, cfg.d, rng);
    }
    return dec;
  }

  int embed_sequence(Tape<T>& t, const std::vector<int64_t>& ids) const {
    const int tok = t.embed(t.param(tok_embed), ids);
    const int pos = t.slice_rows(t.param(pos_embed), 0, ids.size());
    return t.add(tok, pos);
  }

  // Causal decoder; text CLS read from a CLS_TXT token appended at the end,
  // which sees the whole sequence under the causal mask.
  int unimodal_forward_cls(Tape<T>& t, const std::vector<int64_t>& ids,
                           const DropCtx* dc = nullptr) const {
    if (multimodal) throw ConfigError("unimodal_forward on multimodal decoder");
    if (ids.size() > cfg.max_len) throw DataError("sequence longer than max_len");
    std::vector<int64_t> with_cls = ids;
    with_cls.push_back(kClsTxt);
    int h = embed_sequence(t, with_cls);
    for (const auto& blk : blocks) h = blk.forward(t, h, -1, dc);
    h = ln_final.forward(t, h);
    return t.slice_rows(h, with_cls.size() - 1, 1);
  }

  int hidden_states(Tape<T>& t, const std::vector<int64_t>& ids, int ctx,
                    const DropCtx* dc = nullptr) const {
    if (ids.size() > cfg.max_len) throw DataError("sequence longer than max_len");
    int h = embed_sequence(t, ids);
    for (const auto& blk : blocks) h = blk.forward(t, h, ctx, dc);
    return ln_final.forward(t, h);
  }

  // Next-token logits [L, V]; cross-attends to the fused context.
  int multimodal_forward(Tape<T>& t, const std::vector<int64_t>& ids, int ctx,
                         const DropCtx* dc = nullptr) const {
    if (!multimodal) throw ConfigError("multimodal_forward on unimodal decoder");
    if (t.val(ctx).cols() != cfg.d) throw DataError("context dim mismatch");
    return head.forward(t, hidden_states(t, ids, ctx, dc), dc);
  }
};

}  // namespace gebc

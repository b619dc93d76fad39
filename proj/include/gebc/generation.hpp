#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "gebc/model.hpp"
#include "gebc/text.hpp"

namespace gebc {

struct GenConfig {
  size_t max_len = kMaxSeqLen;
  size_t beam_size = 10;
  size_t beam_groups = 5;
  double diversity_penalty = 0.5;
  double length_penalty_exponent = 1.0;

  void validate() const {
    if (beam_size == 0 || beam_groups == 0 || beam_size % beam_groups != 0) {
      throw ConfigError("gen: beam_size must be a positive multiple of beam_groups");
    }
    if (max_len > kMaxSeqLen) throw ConfigError("gen: max_len exceeds 128");
  }
};

// Next-token log-probabilities for a prefix (which starts [type, BOS]).
using StepScorer =
    std::function<std::vector<double>(const std::vector<int64_t>& prefix)>;

struct Hypothesis {
  std::vector<int64_t> tokens;  // includes [type, BOS] prefix
  double logp_sum = 0.0;
  bool finished = false;

  // Generated length (everything after the 2-token prompt).
  size_t gen_len() const { return tokens.size() >= 2 ? tokens.size() - 2 : 0; }
  double normalized_score(double exponent) const {
    const size_t l = std::max<size_t>(1, gen_len());
    return logp_sum / std::pow(double(l), exponent);
  }
};

inline bool hyp_better(const Hypothesis& a, const Hypothesis& b, double exponent) {
  const double sa = a.normalized_score(exponent);
  const double sb = b.normalized_score(exponent);
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;  // deterministic lexicographic tie-break
}

inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  double maxv = logits[0];
  for (double v : logits) maxv = std::max(maxv, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - maxv);
  const double logz = std::log(z);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - maxv - logz;
  return out;
}

// Argmax decoding, ties broken toward the lowest token id.
inline std::vector<int64_t> greedy_decode(const StepScorer& scorer,
                                          int64_t type_tok,
                                          const GenConfig& cfg) {
  std::vector<int64_t> seq = {type_tok, kBos};
  while (seq.size() < cfg.max_len) {
    const std::vector<double> logp = scorer(seq);
    size_t best = 0;
    for (size_t i = 1; i < logp.size(); ++i) {
      if (logp[i] > logp[best]) best = i;
    }
    seq.push_back(int64_t(best));
    if (int64_t(best) == kEos) break;
  }
  return seq;
}

namespace detail {

struct Candidate {
  size_t parent;
  int64_t token;
  double logp_sum;       // unpenalized cumulative
  double select_score;   // cumulative + (possibly penalized) step log-prob
};

// One time step for one beam group. Finished hypotheses carry over and keep
// their slot; live ones expand over the vocabulary. `step_penalty` maps
// token id -> score penalty for this step (diverse groups); chosen tokens of
// newly expanded hypotheses are appended to `chosen_tokens`.
inline void expand_group(std::vector<Hypothesis>& beams, size_t width,
                         const StepScorer& scorer, size_t max_len,
                         const std::map<int64_t, double>* step_penalty,
                         std::vector<int64_t>* chosen_tokens) {
  bool any_live = false;
  for (const auto& h : beams) any_live = any_live || !h.finished;
  if (!any_live) return;

  std::vector<Candidate> cands;
  std::vector<Hypothesis> next;
  for (size_t b = 0; b < beams.size(); ++b) {
    const Hypothesis& h = beams[b];
    if (h.finished || h.tokens.size() >= max_len) {
      Hypothesis done = h;
      done.finished = true;
      next.push_back(std::move(done));
      continue;
    }
    const std::vector<double> logp = scorer(h.tokens);
    for (size_t tok = 0; tok < logp.size(); ++tok) {
      Candidate c;
      c.parent = b;
      c.token = int64_t(tok);
      c.logp_sum = h.logp_sum + logp[tok];
      c.select_score = c.logp_sum;
      if (step_penalty) {
        auto it = step_penalty->find(c.token);
        if (it != step_penalty->end()) c.select_score -= it->second;
      }
      cands.push_back(c);
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a,
                                                  const Candidate& b) {
    if (a.select_score != b.select_score) return a.select_score > b.select_score;
    if (a.token != b.token) return a.token < b.token;
    return a.parent < b.parent;
  });
  for (const Candidate& c : cands) {
    if (next.size() >= width) break;
    Hypothesis h = beams[c.parent];
    h.tokens.push_back(c.token);
    h.logp_sum = c.logp_sum;
    h.finished = (c.token == kEos) || (h.tokens.size() >= max_len);
    if (chosen_tokens) chosen_tokens->push_back(c.token);
    next.push_back(std::move(h));
  }
  beams = std::move(next);
}

}  // namespace detail

// Length-normalized beam search; finished hypotheses retire at EOS; result
// sorted by normalized score descending, ties by token-id order.
inline std::vector<Hypothesis> beam_decode(const StepScorer& scorer,
                                           int64_t type_tok,
                                           const GenConfig& cfg) {
  if (cfg.beam_size < 1) throw ConfigError("beam_decode: beam_size must be >= 1");
  std::vector<Hypothesis> beams(1);
  beams[0].tokens = {type_tok, kBos};
  while (true) {
    bool any_live = false;
    for (const auto& h : beams) any_live = any_live || !h.finished;
    if (!any_live) break;
    detail::expand_group(beams, cfg.beam_size, scorer, cfg.max_len, nullptr,
                         nullptr);
  }
  std::stable_sort(beams.begin(), beams.end(),
                   [&](const Hypothesis& a, const Hypothesis& b) {
                     return hyp_better(a, b, cfg.length_penalty_exponent);
                   });
  if (beams.size() > cfg.beam_size) beams.resize(cfg.beam_size);
  return beams;
}

// Grouped (diverse) beam search with a Hamming penalty: group g's step
// log-probs are reduced by diversity_penalty x (times that token was chosen
// at this step by groups < g). Final ranking uses unpenalized scores.
inline std::vector<Hypothesis> diverse_beam_decode(const StepScorer& scorer,
                                                   int64_t type_tok,
                                                   const GenConfig& cfg) {
  cfg.validate();
  const size_t groups = cfg.beam_groups;
  const size_t per_group = cfg.beam_size / groups;
  std::vector<std::vector<Hypothesis>> group_beams(groups);
  for (auto& g : group_beams) {
    g.resize(1);
    g[0].tokens = {type_tok, kBos};
  }
  while (true) {
    bool any_live = false;
    for (const auto& g : group_beams) {
      for (const auto& h : g) any_live = any_live || !h.finished;
    }
    if (!any_live) break;
    std::map<int64_t, double> penalty;  // token -> penalty from earlier groups
    for (size_t g = 0; g < groups; ++g) {
      std::vector<int64_t> chosen;
      detail::expand_group(group_beams[g], per_group, scorer, cfg.max_len,
                           penalty.empty() ? nullptr : &penalty, &chosen);
      for (int64_t tok : chosen) penalty[tok] += cfg.diversity_penalty;
    }
  }
  std::vector<Hypothesis> all;
  for (auto& g : group_beams) {
    for (auto& h : g) all.push_back(std::move(h));
  }
  std::stable_sort(all.begin(), all.end(),
                   [&](const Hypothesis& a, const Hypothesis& b) {
                     return hyp_better(a, b, cfg.length_penalty_exponent);
                   });
  if (all.size() > cfg.beam_size) all.resize(cfg.beam_size);
  return all;
}

// Scorer backed by the multimodal decoder cross-attending to a record's
// fused context. Recomputes the forward per step; sequences here are short.
template <typename T>
StepScorer model_scorer(const Model<T>& model, const RecordInput& input) {
  // The fused context is input-dependent but fixed across decode steps, so
  // cache its value once and feed it to fresh tapes as a constant.
  Tape<T> warm;
  const FusedContextT<T> ctx = model.forward_context(warm, input);
  auto ctx_val = std::make_shared<Tensor<T>>(warm.val(ctx.tokens));
  const Model<T>* m = &model;
  return [m, ctx_val](const std::vector<int64_t>& prefix) {
    Tape<T> t;
    const int ctx_id = t.input(*ctx_val);
    const int logits = m->multi.multimodal_forward(t, prefix, ctx_id);
    const Tensor<T>& lv = t.val(logits);
    const size_t v = lv.cols();
    std::vector<double> last(v);
    for (size_t j = 0; j < v; ++j) {
      last[j] = double(lv.data[(lv.rows() - 1) * v + j]);
    }
    return log_softmax(last);
  };
}

}  // namespace gebc

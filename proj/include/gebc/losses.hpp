#pragma once

#include <vector>

#include "gebc/autograd.hpp"
#include "gebc/text.hpp"

namespace gebc {

struct LossWeights {
  double lambda_cap = 1.0;
  double lambda_con = 0.1;
};

// Symmetric InfoNCE over a batch of image/text embeddings already on the tape.
// img, txt: [B, d]; temperature: [1,1] tape value. Returns scalar node.
template <typename T>
int contrastive_loss(Tape<T>& t, int img, int txt, int temperature) {
  const size_t b = t.val(img).rows();
  if (b < 2) throw NumericError("contrastive_loss: batch size must be >= 2");
  if (t.val(txt).rows() != b || t.val(txt).cols() != t.val(img).cols()) {
    throw NumericError("contrastive_loss: shape mismatch");
  }
  if (t.val(temperature).data[0] <= T(0)) {
    throw NumericError("contrastive_loss: temperature must be > 0");
  }
  const int img_n = t.l2norm_rows(img);
  const int txt_n = t.l2norm_rows(txt);
  const int logits = t.div_scalar_var(t.matmul_nt(img_n, txt_n), temperature);
  std::vector<int64_t> diag(b);
  for (size_t i = 0; i < b; ++i) diag[i] = int64_t(i);
  const int i2t = t.softmax_xent_rows(logits, diag);
  const int t2i = t.softmax_xent_rows(t.transpose(logits), diag);
  return t.scale(t.add(i2t, t2i), T(0.5));
}

// Convenience: value-only contrastive loss on plain tensors.
template <typename T>
T contrastive_loss_value(const Tensor<T>& img, const Tensor<T>& txt, T temperature) {
  Tape<T> t;
  Tensor<T> tv({1, 1});
  tv.data[0] = temperature;
  const int loss = contrastive_loss(t, t.input(img), t.input(txt), t.input(tv));
  return t.val(loss).data[0];
}

struct CaptionLossStats {
  size_t correct = 0;
  size_t counted = 0;
};

// Next-token cross-entropy: logits [L, V] produced from the full sequence;
// position i is scored against seq[i+1]. PAD targets are excluded.
template <typename T>
int caption_loss(Tape<T>& t, int logits, const std::vector<int64_t>& seq,
                 CaptionLossStats* stats = nullptr) {
  const size_t l = t.val(logits).rows();
  if (seq.size() != l) throw NumericError("caption_loss: logits/sequence mismatch");
  std::vector<int64_t> targets(l, -1);
  size_t n_valid = 0;
  for (size_t i = 0; i + 1 < l; ++i) {
    if (seq[i + 1] != kPad) {
      targets[i] = seq[i + 1];
      ++n_valid;
    }
  }
  if (n_valid == 0) throw NumericError("caption_loss: all-PAD target");
  size_t correct = 0, counted = 0;
  const int loss = t.softmax_xent_rows(logits, targets, &correct, &counted);
  if (stats) {
    stats->correct = correct;
    stats->counted = counted;
  }
  return loss;
}

}  // namespace gebc

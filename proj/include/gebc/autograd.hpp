#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gebc/common.hpp"
#include "gebc/kernels.hpp"
#include "gebc/rng.hpp"
#include "gebc/tensor.hpp"

namespace gebc {

// Named trainable tensor. Gradients accumulate across tape backwards until
// the optimizer consumes and clears them.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  void zero_grad() {
    grad.dims = value.dims;
    grad.data.assign(value.numel(), T(0));
  }
};

template <typename T>
class ParamStore {
 public:
  Param<T>* create(const std::string& name, size_t rows, size_t cols) {
    if (by_name_.count(name)) throw ConfigError("duplicate param: " + name);
    auto p = std::make_unique<Param<T>>();
    p->name = name;
    p->value = Tensor<T>::zeros(rows, cols);
    p->zero_grad();
    Param<T>* raw = p.get();
    items_.push_back(std::move(p));
    by_name_[name] = raw;
    return raw;
  }

  Param<T>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  const std::vector<std::unique_ptr<Param<T>>>& items() const { return items_; }

  void zero_grads() {
    for (auto& p : items_) p->zero_grad();
  }

  size_t trainable_count() const {
    size_t n = 0;
    for (auto& p : items_) {
      if (p->trainable) n += p->value.numel();
    }
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param<T>>> items_;
  std::map<std::string, Param<T>*> by_name_;
};

// Reverse-mode tape over 2-D tensors. Every value on the tape is a matrix
// [rows, cols]; scalars are [1,1].
template <typename T>
class Tape {
 public:
  using Mat = Tensor<T>;

  int input(Mat v, bool needs_grad = false) {
    return push(std::move(v), needs_grad, nullptr);
  }

  int param(Param<T>* p) {
    const int id = push(p->value, p->trainable, nullptr);
    if (p->trainable) bindings_.emplace_back(id, p);
    return id;
  }

  const Mat& val(int id) const { return nodes_[id].val; }

  Mat& grad_ref(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) {
      n.grad.dims = n.val.dims;
      n.grad.data.assign(n.val.numel(), T(0));
    }
    return n.grad;
  }

  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // ---- elementwise / broadcast ----

  int add(int a, int b) {
    const Mat& av = val(a);
    const Mat& bv = val(b);
    if (!av.same_shape(bv)) throw NumericError("add: shape mismatch");
    Mat out = av;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b](Tape& t, Node& n) {
                  if (t.needs_grad(a)) t.accumulate(a, n.grad.data.data());
                  if (t.needs_grad(b)) t.accumulate(b, n.grad.data.data());
                });
  }

  // y[i,:] = a[i,:] + v[0,:]
  int add_rowvec(int a, int v) {
    const Mat& av = val(a);
    const Mat& vv = val(v);
    if (vv.rows() != 1 || vv.cols() != av.cols()) {
      throw NumericError("add_rowvec: shape mismatch");
    }
    Mat out = av;
    const size_t c = av.cols();
    for (size_t i = 0; i < av.rows(); ++i) {
      for (size_t j = 0; j < c; ++j) out.data[i * c + j] += vv.data[j];
    }
    return push(std::move(out), needs_grad(a) || needs_grad(v),
                [a, v](Tape& t, Node& n) {
                  const size_t r = n.val.rows(), c = n.val.cols();
                  if (t.needs_grad(a)) t.accumulate(a, n.grad.data.data());
                  if (t.needs_grad(v)) {
                    Mat& gv = t.grad_ref(v);
                    for (size_t i = 0; i < r; ++i) {
                      for (size_t j = 0; j < c; ++j) {
                        gv.data[j] += n.grad.data[i * c + j];
                      }
                    }
                  }
                });
  }

  int scale(int a, T c) {
    Mat out = val(a);
    for (T& x : out.data) x *= c;
    return push(std::move(out), needs_grad(a), [a, c](Tape& t, Node& n) {
      if (!t.needs_grad(a)) return;
      Mat& ga = t.grad_ref(a);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += c * n.grad.data[i];
    });
  }

  // y = a / s where s is a [1,1] tape value (e.g. a learnable temperature).
  int div_scalar_var(int a, int s) {
    const T sv = val(s).data[0];
    if (sv == T(0)) throw NumericError("div_scalar_var: zero denominator");
    Mat out = val(a);
    for (T& x : out.data) x /= sv;
    return push(std::move(out), needs_grad(a) || needs_grad(s),
                [a, s, sv](Tape& t, Node& n) {
                  if (t.needs_grad(a)) {
                    Mat& ga = t.grad_ref(a);
                    for (size_t i = 0; i < ga.data.size(); ++i) {
                      ga.data[i] += n.grad.data[i] / sv;
                    }
                  }
                  if (t.needs_grad(s)) {
                    const Mat& av = t.val(a);
                    T acc = T(0);
                    for (size_t i = 0; i < av.data.size(); ++i) {
                      acc += n.grad.data[i] * av.data[i];
                    }
                    t.grad_ref(s).data[0] -= acc / (sv * sv);
                  }
                });
  }

  // ---- matmul family ----

  // y = a[M,K] * b[K,N]
  int matmul(int a, int b) {
    const Mat& av = val(a);
    const Mat& bv = val(b);
    if (av.cols() != bv.rows()) throw NumericError("matmul: inner dim mismatch");
    const size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Mat out({m, n});
    kernels::gemm_nn(out.data.data(), av.data.data(), bv.data.data(), m, k, n);
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b, m, k, n](Tape& t, Node& nd) {
                  if (t.needs_grad(a)) {
                    // dA = dY * B^T
                    Mat tmp({m, k});
                    kernels::gemm_nt(tmp.data.data(), nd.grad.data.data(),
                                     t.val(b).data.data(), m, n, k);
                    t.accumulate(a, tmp.data.data());
                  }
                  if (t.needs_grad(b)) {
                    // dB = A^T * dY
                    Mat tmp({k, n});
                    kernels::gemm_tn(tmp.data.data(), t.val(a).data.data(),
                                     nd.grad.data.data(), k, m, n);
                    t.accumulate(b, tmp.data.data());
                  }
                });
  }

  // y = a[M,K] * b[N,K]^T   (linear layers store W as [out,in])
  int matmul_nt(int a, int b) {
    const Mat& av = val(a);
    const Mat& bv = val(b);
    if (av.cols() != bv.cols()) throw NumericError("matmul_nt: inner dim mismatch");
    const size_t m = av.rows(), k = av.cols(), n = bv.rows();
    Mat out({m, n});
    kernels::gemm_nt(out.data.data(), av.data.data(), bv.data.data(), m, k, n);
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b, m, k, n](Tape& t, Node& nd) {
                  if (t.needs_grad(a)) {
                    // dA = dY * B
                    Mat tmp({m, k});
                    kernels::gemm_nn(tmp.data.data(), nd.grad.data.data(),
                                     t.val(b).data.data(), m, n, k);
                    t.accumulate(a, tmp.data.data());
                  }
                  if (t.needs_grad(b)) {
                    // dB = dY^T * A
                    Mat tmp({n, k});
                    kernels::gemm_tn(tmp.data.data(), nd.grad.data.data(),
                                     t.val(a).data.data(), n, m, k);
                    t.accumulate(b, tmp.data.data());
                  }
                });
  }

  int transpose(int a) {
    const Mat& av = val(a);
    const size_t r = av.rows(), c = av.cols();
    Mat out({c, r});
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < c; ++j) out.data[j * r + i] = av.data[i * c + j];
    }
    return push(std::move(out), needs_grad(a), [a, r, c](Tape& t, Node& n) {
      if (!t.needs_grad(a)) return;
      Mat& ga = t.grad_ref(a);
      for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) ga.data[i * c + j] += n.grad.data[j * r + i];
      }
    });
  }

  // ---- normalization & activations ----

  int layernorm(int x, int gamma, int beta, T eps = T(1e-5)) {
    const Mat& xv = val(x);
    const Mat& gv = val(gamma);
    const Mat& bv = val(beta);
    const size_t r = xv.rows(), c = xv.cols();
    if (gv.cols() != c || bv.cols() != c || gv.rows() != 1 || bv.rows() != 1) {
      throw NumericError("layernorm: affine shape mismatch");
    }
    Mat out({r, c});
    Mat xhat({r, c});
    std::vector<T> inv_std(r);
    for (size_t i = 0; i < r; ++i) {
      const T* xi = &xv.data[i * c];
      T mean = T(0);
      for (size_t j = 0; j < c; ++j) mean += xi[j];
      mean /= T(c);
      T var = T(0);
      for (size_t j = 0; j < c; ++j) {
        const T d = xi[j] - mean;
        var += d * d;
      }
      var /= T(c);
      const T istd = T(1) / std::sqrt(var + eps);
      inv_std[i] = istd;
      for (size_t j = 0; j < c; ++j) {
        const T h = (xi[j] - mean) * istd;
        xhat.data[i * c + j] = h;
        out.data[i * c + j] = gv.data[j] * h + bv.data[j];
      }
    }
    return push(
        std::move(out), needs_grad(x) || needs_grad(gamma) || needs_grad(beta),
        [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), r,
         c](Tape& t, Node& n) {
          const Mat& gv = t.val(gamma);
          if (t.needs_grad(gamma)) {
            Mat& gg = t.grad_ref(gamma);
            for (size_t i = 0; i < r; ++i) {
              for (size_t j = 0; j < c; ++j) {
                gg.data[j] += n.grad.data[i * c + j] * xhat.data[i * c + j];
              }
            }
          }
          if (t.needs_grad(beta)) {
            Mat& gb = t.grad_ref(beta);
            for (size_t i = 0; i < r; ++i) {
              for (size_t j = 0; j < c; ++j) gb.data[j] += n.grad.data[i * c + j];
            }
          }
          if (t.needs_grad(x)) {
            Mat& gx = t.grad_ref(x);
            for (size_t i = 0; i < r; ++i) {
              T sum_g = T(0), sum_gx = T(0);
              for (size_t j = 0; j < c; ++j) {
                const T gj = n.grad.data[i * c + j] * gv.data[j];
                sum_g += gj;
                sum_gx += gj * xhat.data[i * c + j];
              }
              const T inv_c = T(1) / T(c);
              for (size_t j = 0; j < c; ++j) {
                const T gj = n.grad.data[i * c + j] * gv.data[j];
                gx.data[i * c + j] +=
                    inv_std[i] *
                    (gj - inv_c * sum_g - xhat.data[i * c + j] * inv_c * sum_gx);
              }
            }
          }
        });
  }

  int gelu(int a) {
    static constexpr double kC = 0.7978845608028653559;  // sqrt(2/pi)
    static constexpr double kA = 0.044715;
    const Mat& av = val(a);
    Mat out = av;
    for (T& x : out.data) {
      const double xd = double(x);
      const double u = kC * (xd + kA * xd * xd * xd);
      x = T(0.5 * xd * (1.0 + std::tanh(u)));
    }
    return push(std::move(out), needs_grad(a), [a](Tape& t, Node& n) {
      if (!t.needs_grad(a)) return;
      Mat& ga = t.grad_ref(a);
      const Mat& av = t.val(a);
      for (size_t i = 0; i < av.data.size(); ++i) {
        const double xd = double(av.data[i]);
        const double u = kC * (xd + kA * xd * xd * xd);
        const double th = std::tanh(u);
        const double du = kC * (1.0 + 3.0 * kA * xd * xd);
        const double d = 0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th * th) * du;
        ga.data[i] += n.grad.data[i] * T(d);
      }
    });
  }

  // ---- attention ----

  // Multi-head scaled-dot attention on already-projected q/k/v.
  // q [Lq,d], k,v [Lk,d]; causal requires Lq == Lk.
  int mha(int q, int k, int v, size_t heads, bool causal) {
    const Mat& qv = val(q);
    const Mat& kv = val(k);
    const Mat& vv = val(v);
    const size_t lq = qv.rows(), lk = kv.rows(), d = qv.cols();
    if (kv.cols() != d || vv.cols() != d || vv.rows() != lk) {
      throw NumericError("mha: shape mismatch");
    }
    if (d % heads != 0) throw NumericError("mha: d not divisible by heads");
    if (causal && lq != lk) throw NumericError("mha: causal needs Lq == Lk");
    const size_t dh = d / heads;
    const T inv_sqrt = T(1) / T(std::sqrt(double(dh)));

    Mat out({lq, d});
    // attention weights per head, [heads, lq, lk] flattened
    std::vector<T> attn(heads * lq * lk, T(0));
    for (size_t h = 0; h < heads; ++h) {
      const size_t off = h * dh;
      for (size_t i = 0; i < lq; ++i) {
        T* arow = &attn[(h * lq + i) * lk];
        const size_t jmax = causal ? i + 1 : lk;
        T maxs = -std::numeric_limits<T>::infinity();
        for (size_t j = 0; j < jmax; ++j) {
          T s = T(0);
          const T* qi = &qv.data[i * d + off];
          const T* kj = &kv.data[j * d + off];
          for (size_t p = 0; p < dh; ++p) s += qi[p] * kj[p];
          s *= inv_sqrt;
          arow[j] = s;
          if (s > maxs) maxs = s;
        }
        T z = T(0);
        for (size_t j = 0; j < jmax; ++j) {
          arow[j] = std::exp(arow[j] - maxs);
          z += arow[j];
        }
        for (size_t j = 0; j < jmax; ++j) arow[j] /= z;
        for (size_t j = jmax; j < lk; ++j) arow[j] = T(0);
        T* oi = &out.data[i * d + off];
        for (size_t p = 0; p < dh; ++p) oi[p] = T(0);
        for (size_t j = 0; j < jmax; ++j) {
          const T a = arow[j];
          const T* vj = &vv.data[j * d + off];
          for (size_t p = 0; p < dh; ++p) oi[p] += a * vj[p];
        }
      }
    }
    return push(
        std::move(out), needs_grad(q) || needs_grad(k) || needs_grad(v),
        [q, k, v, heads, causal, dh, lq, lk, d, inv_sqrt,
         attn = std::move(attn)](Tape& t, Node& n) {
          const Mat& qv = t.val(q);
          const Mat& kv = t.val(k);
          const Mat& vv = t.val(v);
          const bool gq = t.needs_grad(q), gk = t.needs_grad(k),
                     gv_ = t.needs_grad(v);
          Mat* dq = gq ? &t.grad_ref(q) : nullptr;
          Mat* dk = gk ? &t.grad_ref(k) : nullptr;
          Mat* dv = gv_ ? &t.grad_ref(v) : nullptr;
          for (size_t h = 0; h < heads; ++h) {
            const size_t off = h * dh;
            for (size_t i = 0; i < lq; ++i) {
              const T* arow = &attn[(h * lq + i) * lk];
              const T* go = &n.grad.data[i * d + off];
              const size_t jmax = causal ? i + 1 : lk;
              // dA[j] = go . v_j ; dS = A * (dA - sum_j A dA)
              T dot_sum = T(0);
              std::vector<T> dA(jmax);
              for (size_t j = 0; j < jmax; ++j) {
                const T* vj = &vv.data[j * d + off];
                T acc = T(0);
                for (size_t p = 0; p < dh; ++p) acc += go[p] * vj[p];
                dA[j] = acc;
                dot_sum += arow[j] * acc;
                if (gv_) {
                  T* dvj = &dv->data[j * d + off];
                  for (size_t p = 0; p < dh; ++p) dvj[p] += arow[j] * go[p];
                }
              }
              if (gq || gk) {
                const T* qi = &qv.data[i * d + off];
                for (size_t j = 0; j < jmax; ++j) {
                  const T ds = arow[j] * (dA[j] - dot_sum) * inv_sqrt;
                  const T* kj = &kv.data[j * d + off];
                  if (gq) {
                    T* dqi = &dq->data[i * d + off];
                    for (size_t p = 0; p < dh; ++p) dqi[p] += ds * kj[p];
                  }
                  if (gk) {
                    T* dkj = &dk->data[j * d + off];
                    for (size_t p = 0; p < dh; ++p) dkj[p] += ds * qi[p];
                  }
                }
              }
            }
          }
        });
  }

  // ---- structural ----

  int concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw NumericError("concat_rows: empty");
    const size_t c = val(parts[0]).cols();
    size_t r = 0;
    bool ng = false;
    for (int p : parts) {
      if (val(p).cols() != c) throw NumericError("concat_rows: col mismatch");
      r += val(p).rows();
      ng = ng || needs_grad(p);
    }
    Mat out({r, c});
    size_t row = 0;
    for (int p : parts) {
      const Mat& pv = val(p);
      std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + row * c);
      row += pv.rows();
    }
    return push(std::move(out), ng, [parts, c](Tape& t, Node& n) {
      size_t row = 0;
      for (int p : parts) {
        const size_t pr = t.val(p).rows();
        if (t.needs_grad(p)) {
          Mat& gp = t.grad_ref(p);
          for (size_t i = 0; i < pr * c; ++i) gp.data[i] += n.grad.data[row * c + i];
        }
        row += pr;
      }
    });
  }

  int slice_rows(int a, size_t r0, size_t nrows) {
    const Mat& av = val(a);
    const size_t c = av.cols();
    if (r0 + nrows > av.rows()) throw NumericError("slice_rows: out of range");
    Mat out({nrows, c});
    std::copy(av.data.begin() + r0 * c, av.data.begin() + (r0 + nrows) * c,
              out.data.begin());
    return push(std::move(out), needs_grad(a), [a, r0, c](Tape& t, Node& n) {
      if (!t.needs_grad(a)) return;
      Mat& ga = t.grad_ref(a);
      for (size_t i = 0; i < n.grad.data.size(); ++i) {
        ga.data[r0 * c + i] += n.grad.data[i];
      }
    });
  }

  int mean_rows(int a) {
    const Mat& av = val(a);
    const size_t r = av.rows(), c = av.cols();
    if (r == 0) throw NumericError("mean_rows: empty input");
    Mat out({1, c});
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < c; ++j) out.data[j] += av.data[i * c + j];
    }
    for (size_t j = 0; j < c; ++j) out.data[j] /= T(r);
    return push(std::move(out), needs_grad(a), [a, r, c](Tape& t, Node& n) {
      if (!t.needs_grad(a)) return;
      Mat& ga = t.grad_ref(a);
      const T inv = T(1) / T(r);
      for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) ga.data[i * c + j] += n.grad.data[j] * inv;
      }
    });
  }

  // out[p,:] = a[pairs[p].first,:] - a[pairs[p].second,:]
  int pair_diff(int a, std::vector<std::pair<size_t, size_t>> pairs) {
    const Mat& av = val(a);
    const size_t c = av.cols();
    Mat out({pairs.size(), c});
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      if (i >= av.rows() || j >= av.rows()) throw NumericError("pair_diff: index");
      for (size_t q = 0; q < c; ++q) {
        out.data[p * c + q] = av.data[i * c + q] - av.data[j * c + q];
      }
    }
    return push(std::move(out), needs_grad(a),
                [a, pairs = std::move(pairs), c](Tape& t, Node& n) {
                  if (!t.needs_grad(a)) return;
                  Mat& ga = t.grad_ref(a);
                  for (size_t p = 0; p < pairs.size(); ++p) {
                    const auto [i, j] = pairs[p];
                    for (size_t q = 0; q < c; ++q) {
                      const T g = n.grad.data[p * c + q];
                      ga.data[i * c + q] += g;
                      ga.data[j * c + q] -= g;
                    }
                  }
                });
  }

  // Row gather from an embedding table.
  int embed(int table, std::vector<int64_t> ids) {
    const Mat& tv = val(table);
    const size_t c = tv.cols();
    Mat out({ids.size(), c});
    for (size_t i = 0; i < ids.size(); ++i) {
      const int64_t id = ids[i];
      if (id < 0 || size_t(id) >= tv.rows()) throw NumericError("embed: id range");
      std::copy(&tv.data[size_t(id) * c], &tv.data[(size_t(id) + 1) * c],
                &out.data[i * c]);
    }
    return push(std::move(out), needs_grad(table),
                [table, ids = std::move(ids), c](Tape& t, Node& n) {
                  if (!t.needs_grad(table)) return;
                  Mat& gt = t.grad_ref(table);
                  for (size_t i = 0; i < ids.size(); ++i) {
                    for (size_t q = 0; q < c; ++q) {
                      gt.data[size_t(ids[i]) * c + q] += n.grad.data[i * c + q];
                    }
                  }
                });
  }

  int l2norm_rows(int a, T eps = T(1e-12)) {
    const Mat& av = val(a);
    const size_t r = av.rows(), c = av.cols();
    Mat out({r, c});
    std::vector<T> inv_norm(r);
    for (size_t i = 0; i < r; ++i) {
      T s = T(0);
      for (size_t j = 0; j < c; ++j) s += av.data[i * c + j] * av.data[i * c + j];
      const T inv = T(1) / std::sqrt(s + eps);
      inv_norm[i] = inv;
      for (size_t j = 0; j < c; ++j) out.data[i * c + j] = av.data[i * c + j] * inv;
    }
    return push(std::move(out), needs_grad(a),
                [a, inv_norm = std::move(inv_norm), r, c](Tape& t, Node& n) {
                  if (!t.needs_grad(a)) return;
                  Mat& ga = t.grad_ref(a);
                  for (size_t i = 0; i < r; ++i) {
                    T dot = T(0);
                    for (size_t j = 0; j < c; ++j) {
                      dot += n.grad.data[i * c + j] * n.val.data[i * c + j];
                    }
                    for (size_t j = 0; j < c; ++j) {
                      ga.data[i * c + j] +=
                          inv_norm[i] *
                          (n.grad.data[i * c + j] - n.val.data[i * c + j] * dot);
                    }
                  }
                });
  }

  // Inverted dropout; identity when p == 0.
  int dropout(int a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw NumericError("dropout: p >= 1");
    const Mat& av = val(a);
    Mat out = av;
    std::vector<uint8_t> keep(av.data.size());
    const T scale = T(1.0 / (1.0 - p));
    for (size_t i = 0; i < out.data.size(); ++i) {
      keep[i] = rng.uniform() >= p ? 1 : 0;
      out.data[i] = keep[i] ? out.data[i] * scale : T(0);
    }
    return push(std::move(out), needs_grad(a),
                [a, keep = std::move(keep), scale](Tape& t, Node& n) {
                  if (!t.needs_grad(a)) return;
                  Mat& ga = t.grad_ref(a);
                  for (size_t i = 0; i < ga.data.size(); ++i) {
                    if (keep[i]) ga.data[i] += n.grad.data[i] * scale;
                  }
                });
  }

  // Mean cross-entropy over rows whose target id is >= 0.
  // Returns [1,1]. `correct`/`counted` report top-1 stats for the same rows.
  int softmax_xent_rows(int logits, const std::vector<int64_t>& targets,
                        size_t* correct = nullptr, size_t* counted = nullptr) {
    const Mat& lv = val(logits);
    const size_t r = lv.rows(), c = lv.cols();
    if (targets.size() != r) throw NumericError("xent: target length mismatch");
    Mat probs({r, c});
    size_t n_valid = 0;
    double loss = 0.0;
    size_t n_correct = 0;
    for (size_t i = 0; i < r; ++i) {
      if (targets[i] < 0) continue;
      ++n_valid;
      const T* li = &lv.data[i * c];
      T maxv = li[0];
      size_t arg = 0;
      for (size_t j = 1; j < c; ++j) {
        if (li[j] > maxv) {
          maxv = li[j];
          arg = j;
        }
      }
      double z = 0.0;
      for (size_t j = 0; j < c; ++j) z += std::exp(double(li[j] - maxv));
      const double logz = std::log(z);
      for (size_t j = 0; j < c; ++j) {
        probs.data[i * c + j] = T(std::exp(double(li[j] - maxv)) / z);
      }
      loss -= double(li[size_t(targets[i])] - maxv) - logz;
      if (arg == size_t(targets[i])) ++n_correct;
    }
    if (n_valid == 0) throw NumericError("xent: no valid target positions");
    if (correct) *correct = n_correct;
    if (counted) *counted = n_valid;
    Mat out({1, 1});
    out.data[0] = T(loss / double(n_valid));
    return push(std::move(out), needs_grad(logits),
                [logits, targets, probs = std::move(probs), n_valid, r,
                 c](Tape& t, Node& n) {
                  if (!t.needs_grad(logits)) return;
                  Mat& gl = t.grad_ref(logits);
                  const T g = n.grad.data[0] / T(n_valid);
                  for (size_t i = 0; i < r; ++i) {
                    if (targets[i] < 0) continue;
                    for (size_t j = 0; j < c; ++j) {
                      T p = probs.data[i * c + j];
                      if (int64_t(j) == targets[i]) p -= T(1);
                      gl.data[i * c + j] += g * p;
                    }
                  }
                });
  }

  void backward(int loss_id) {
    if (val(loss_id).numel() != 1) throw NumericError("backward: loss not scalar");
    grad_ref(loss_id).data[0] = T(1);
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.needs_grad && !n.grad.data.empty()) n.back(*this, n);
    }
    for (auto& [id, p] : bindings_) {
      const Mat& g = nodes_[id].grad;
      if (g.data.empty()) continue;
      for (size_t i = 0; i < g.data.size(); ++i) p->grad.data[i] += g.data[i];
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&, Node&)> back;
  };

  int push(Mat v, bool ng, std::function<void(Tape&, Node&)> back) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = ng;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  void accumulate(int id, const T* g) {
    Mat& dst = grad_ref(id);
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g[i];
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param<T>*>> bindings_;
};

}  // namespace gebc

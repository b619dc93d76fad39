#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gebc/autograd.hpp"

namespace gebc {

struct OptimizerConfig {
  std::string kind = "adafactor";  // or "adamw"
  double beta1 = 0.9;
  double beta2 = 0.999;  // adamw only
  double weight_decay = 0.01;
  double clip_threshold = 1.0;
  double eps1 = 1e-30;
  double eps_adam = 1e-8;
};

// Adafactor with factored second moments for matrices, full second moment
// for vectors, decay 1 - t^-0.8, RMS update clipping, beta1 momentum and
// decoupled weight decay. Learning rate comes from the external schedule.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.kind != "adafactor" && cfg_.kind != "adamw") {
      throw ConfigError("optimizer: unknown kind " + cfg_.kind);
    }
  }

  // t is the 1-based step index. Throws NumericError on non-finite gradients
  // (the caller treats that as a rejected step).
  void step(ParamStore<T>& store, size_t t, double lr) {
    for (const auto& p : store.items()) {
      if (!p->trainable) continue;
      for (T g : p->grad.data) {
        if (!std::isfinite(double(g))) {
          throw NumericError("non-finite gradient in parameter " + p->name);
        }
      }
      if (cfg_.kind == "adafactor") {
        adafactor_update(*p, t, lr);
      } else {
        adamw_update(*p, t, lr);
      }
    }
  }

 private:
  struct State {
    std::vector<double> row;  // factored row accumulator
    std::vector<double> col;  // factored column accumulator
    std::vector<double> v;    // full second moment (vectors / adamw)
    std::vector<double> m;    // first moment
  };

  void adafactor_update(Param<T>& p, size_t t, double lr) {
    const size_t rows = p.value.rows(), cols = p.value.cols();
    const size_t n = p.value.numel();
    State& s = states_[p.name];
    if (s.m.empty()) s.m.assign(n, 0.0);
    const double rho = 1.0 - std::pow(double(t), -0.8);
    std::vector<double> u(n);
    const bool factored = rows > 1 && cols > 1;
    if (factored) {
      if (s.row.empty()) {
        s.row.assign(rows, 0.0);
        s.col.assign(cols, 0.0);
      }
      std::vector<double> rsum(rows, 0.0), csum(cols, 0.0);
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) {
          const double g2 = double(p.grad.data[i * cols + j]) *
                                double(p.grad.data[i * cols + j]) +
                            cfg_.eps1;
          rsum[i] += g2;
          csum[j] += g2;
        }
      }
      double row_total = 0.0;
      for (size_t i = 0; i < rows; ++i) {
        s.row[i] = rho * s.row[i] + (1.0 - rho) * rsum[i];
        row_total += s.row[i];
      }
      for (size_t j = 0; j < cols; ++j) {
        s.col[j] = rho * s.col[j] + (1.0 - rho) * csum[j];
      }
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) {
          const double vhat = s.row[i] * s.col[j] / row_total;
          u[i * cols + j] = double(p.grad.data[i * cols + j]) / std::sqrt(vhat);
        }
      }
    } else {
      if (s.v.empty()) s.v.assign(n, 0.0);
      for (size_t i = 0; i < n; ++i) {
        const double g = double(p.grad.data[i]);
        s.v[i] = rho * s.v[i] + (1.0 - rho) * (g * g + cfg_.eps1);
        u[i] = g / std::sqrt(s.v[i]);
      }
    }
    double rms = 0.0;
    for (double x : u) rms += x * x;
    rms = std::sqrt(rms / double(n));
    const double denom = std::max(1.0, rms / cfg_.clip_threshold);
    for (size_t i = 0; i < n; ++i) {
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * (u[i] / denom);
      p.value.data[i] = T(double(p.value.data[i]) - lr * s.m[i] -
                          lr * cfg_.weight_decay * double(p.value.data[i]));
    }
  }

  void adamw_update(Param<T>& p, size_t t, double lr) {
    const size_t n = p.value.numel();
    State& s = states_[p.name];
    if (s.m.empty()) {
      s.m.assign(n, 0.0);
      s.v.assign(n, 0.0);
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t));
    for (size_t i = 0; i < n; ++i) {
      const double g = double(p.grad.data[i]);
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mh = s.m[i] / bc1;
      const double vh = s.v[i] / bc2;
      p.value.data[i] = T(double(p.value.data[i]) -
                          lr * mh / (std::sqrt(vh) + cfg_.eps_adam) -
                          lr * cfg_.weight_decay * double(p.value.data[i]));
    }
  }

  OptimizerConfig cfg_;
  std::map<std::string, State> states_;
};

// Linear warmup 0 -> peak over warmup_steps, then cosine decay to 0 at
// total_steps.
inline double lr_schedule(size_t step, size_t warmup_steps, size_t total_steps,
                          double peak) {
  if (step > total_steps) throw ConfigError("lr_schedule: step beyond total");
  if (warmup_steps > 0 && step <= warmup_steps) {
    return peak * double(step) / double(warmup_steps);
  }
  if (total_steps <= warmup_steps) return peak;
  const double progress =
      double(step - warmup_steps) / double(total_steps - warmup_steps);
  return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace gebc

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gebc/losses.hpp"
#include "gebc/model.hpp"
#include "gebc/optimizer.hpp"

#include "json.hpp"

namespace gebc {

struct TrainConfig {
  size_t steps = 10000;
  size_t batch = 8;
  size_t warmup_steps = 300;
  std::string optimizer = "adafactor";  // or "adamw"
  double beta1 = 0.9;
  double weight_decay = 0.01;
  double lr_peak = 1e-4;
  double temperature_init = 0.07;
  double temperature_min = 1e-3;
  size_t eval_interval = 50;
  double target_acc = 0.0;  // > 0: stop once validation accuracy reaches it
  uint64_t seed = 0;
  LossWeights weights;

  void validate() const {
    if (warmup_steps > steps) throw ConfigError("train: warmup_steps > steps");
    if (batch < 2) throw ConfigError("train: batch must be >= 2 for contrastive loss");
    if (weights.lambda_cap < 0 || weights.lambda_con < 0) {
      throw ConfigError("train: loss weights must be >= 0");
    }
  }
};

struct LossBreakdown {
  double l_con = 0;
  double l_cap = 0;
  double l_total = 0;
  double token_top1_acc = 0;
};

struct LogRow {
  size_t step = 0;
  double l_con = 0, l_cap = 0, l_total = 0;
  double val_acc = -1;  // < 0 when not evaluated this step
  double lr = 0;
};

struct TrainResult {
  double best_acc = -1;
  size_t best_step = 0;
  std::vector<LogRow> log;
};

// Deterministic 90/10 split by record-index hash.
inline void split_records(size_t n, std::vector<size_t>& train_idx,
                          std::vector<size_t>& val_idx) {
  for (size_t i = 0; i < n; ++i) {
    if (splitmix64(uint64_t(i) ^ 0x5eedf00dull) % 10 == 0) {
      val_idx.push_back(i);
    } else {
      train_idx.push_back(i);
    }
  }
  if (train_idx.empty() || val_idx.empty()) {
    throw DataError("train: corpus split produced an empty train or validation set");
  }
}

// Pooled validation token top-1 accuracy across all three caption types.
template <typename T>
double validation_accuracy(const Model<T>& model,
                           const std::vector<RecordInput>& inputs,
                           const std::vector<size_t>& idx) {
  size_t correct = 0, counted = 0;
  for (size_t i : idx) {
    const RecordInput& in = inputs[i];
    Tape<T> t;
    const FusedContextT<T> ctx = model.forward_context(t, in);
    for (CaptionType type :
         {CaptionType::Subject, CaptionType::Before, CaptionType::After}) {
      const auto seq = build_target(in.captions, type, model.vocab);
      const int logits = model.multi.multimodal_forward(t, seq, ctx.tokens);
      CaptionLossStats stats;
      caption_loss(t, logits, seq, &stats);
      correct += stats.correct;
      counted += stats.counted;
    }
  }
  return counted ? double(correct) / double(counted) : 0.0;
}

template <typename T>
struct StepOutput {
  int total = -1;
  LossBreakdown breakdown;
};

// One training forward over a batch of records: caption loss averaged over
// records plus the symmetric contrastive loss over pooled image CLS vs text
// CLS embeddings.
template <typename T>
StepOutput<T> batch_forward(Tape<T>& t, const Model<T>& model,
                            const std::vector<RecordInput>& inputs,
                            const std::vector<size_t>& batch_idx,
                            CaptionType type, const LossWeights& w,
                            const DropCtx* dc) {
  std::vector<int> img_rows, txt_rows;
  int cap_sum = -1;
  size_t correct = 0, counted = 0;
  for (size_t i : batch_idx) {
    const RecordInput& in = inputs[i];
    const FusedContextT<T> ctx = model.forward_context(t, in, dc);
    const auto seq = build_target(in.captions, type, model.vocab);
    const int txt_cls = model.uni.unimodal_forward_cls(t, seq, dc);
    const int logits = model.multi.multimodal_forward(t, seq, ctx.tokens, dc);
    CaptionLossStats stats;
    const int cap = caption_loss(t, logits, seq, &stats);
    correct += stats.correct;
    counted += stats.counted;
    cap_sum = cap_sum < 0 ? cap : t.add(cap_sum, cap);
    img_rows.push_back(ctx.pooled_cls);
    txt_rows.push_back(txt_cls);
  }
  const int l_cap = t.scale(cap_sum, T(1) / T(batch_idx.size()));
  const int l_con =
      contrastive_loss(t, t.concat_rows(img_rows), t.concat_rows(txt_rows),
                       t.param(model.temperature));
  const int total = t.add(t.scale(l_cap, T(w.lambda_cap)),
                          t.scale(l_con, T(w.lambda_con)));
  StepOutput<T> out;
  out.total = total;
  out.breakdown.l_cap = double(t.val(l_cap).data[0]);
  out.breakdown.l_con = double(t.val(l_con).data[0]);
  out.breakdown.l_total = double(t.val(total).data[0]);
  out.breakdown.token_top1_acc =
      counted ? double(correct) / double(counted) : 0.0;
  return out;
}

inline void write_metrics_csv(const std::string& path,
                              const std::vector<LogRow>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write metrics log: " + path);
  os << "step,l_con,l_cap,l_total,val_acc,lr\n";
  char buf[256];
  for (const auto& r : log) {
    if (r.val_acc >= 0) {
      std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g,%.8g,%.8g,%.8g\n", r.step,
                    r.l_con, r.l_cap, r.l_total, r.val_acc, r.lr);
    } else {
      std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g,%.8g,,%.8g\n", r.step,
                    r.l_con, r.l_cap, r.l_total, r.lr);
    }
    os << buf;
  }
}

// Caption types cycle SUBJ -> BEF -> AFT per step; batches sampled with
// replacement from the train split; best checkpoint kept by validation
// token top-1 accuracy.
template <typename T>
TrainResult train(Model<T>& model, const std::vector<RecordInput>& inputs,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& run_config_json, size_t start_step = 0,
                  uint64_t resume_rng_state = 0) {
  cfg.validate();
  std::vector<size_t> train_idx, val_idx;
  split_records(inputs.size(), train_idx, val_idx);

  Rng rng(splitmix64(cfg.seed ^ 0x7ea1ull));
  if (resume_rng_state) rng.set_state(resume_rng_state);

  OptimizerConfig ocfg;
  ocfg.kind = cfg.optimizer;
  ocfg.beta1 = cfg.beta1;
  ocfg.weight_decay = cfg.weight_decay;
  Optimizer<T> opt(ocfg);

  std::filesystem::create_directories(out_dir);
  const std::string ckpt_path =
      (std::filesystem::path(out_dir) / "checkpoint.rvtc").string();

  auto save_checkpoint = [&](size_t step, double best_acc) {
    nlohmann::json meta;
    meta["step"] = step;
    meta["best_acc"] = best_acc;
    meta["rng_state"] = rng.state();
    meta["config"] = nlohmann::json::parse(
        run_config_json.empty() ? "{}" : run_config_json);
    meta["vocab"] = nlohmann::json::parse(model.vocab.to_json());
    write_container_file(model.to_checkpoint(meta.dump()), ckpt_path);
  };

  TrainResult result;
  DropCtx dc{true, &rng};
  for (size_t step = start_step + 1; step <= cfg.steps; ++step) {
    const double lr = lr_schedule(step, cfg.warmup_steps, cfg.steps, cfg.lr_peak);
    const CaptionType type = CaptionType((step - 1) % 3);
    std::vector<size_t> batch_idx;
    for (size_t b = 0; b < cfg.batch; ++b) {
      batch_idx.push_back(train_idx[rng.below(train_idx.size())]);
    }
    Tape<T> t;
    const StepOutput<T> out =
        batch_forward(t, model, inputs, batch_idx, type, cfg.weights, &dc);
    if (!std::isfinite(out.breakdown.l_total)) {
      throw NumericError("non-finite loss at step " + std::to_string(step) +
                         " (l_cap=" + std::to_string(out.breakdown.l_cap) +
                         ", l_con=" + std::to_string(out.breakdown.l_con) + ")");
    }
    const double recomposed = cfg.weights.lambda_con * out.breakdown.l_con +
                              cfg.weights.lambda_cap * out.breakdown.l_cap;
    if (std::abs(recomposed - out.breakdown.l_total) > 1e-4) {
      throw NumericError("loss recomposition identity violated at step " +
                         std::to_string(step));
    }
    model.store.zero_grads();
    t.backward(out.total);
    try {
      opt.step(model.store, step, lr);
    } catch (const NumericError& e) {
      // Rejected step: parameters keep their previous values.
      std::fprintf(stderr, "step %zu rejected: %s\n", step, e.what());
    }
    if (model.temperature->value.data[0] < T(cfg.temperature_min)) {
      model.temperature->value.data[0] = T(cfg.temperature_min);
    }

    LogRow row;
    row.step = step;
    row.l_con = out.breakdown.l_con;
    row.l_cap = out.breakdown.l_cap;
    row.l_total = out.breakdown.l_total;
    row.lr = lr;
    if (step % cfg.eval_interval == 0 || step == cfg.steps) {
      row.val_acc = validation_accuracy(model, inputs, val_idx);
      if (row.val_acc > result.best_acc) {
        result.best_acc = row.val_acc;
        result.best_step = step;
        save_checkpoint(step, result.best_acc);
      }
    }
    result.log.push_back(row);
    if (cfg.target_acc > 0 && result.best_acc >= cfg.target_acc) break;
  }
  if (result.best_acc < 0) {
    // No eval happened (steps < eval_interval); checkpoint final state.
    result.best_acc = validation_accuracy(model, inputs, val_idx);
    result.best_step = cfg.steps;
    save_checkpoint(cfg.steps, result.best_acc);
  }
  write_metrics_csv((std::filesystem::path(out_dir) / "metrics.csv").string(),
                    result.log);
  return result;
}

}  // namespace gebc

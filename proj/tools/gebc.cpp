// Command-line front end: synth | train | generate | evaluate | report.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "gebc/config.hpp"
#include "gebc/evaluate.hpp"
#include "gebc/generation.hpp"
#include "gebc/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* env = std::getenv("GEBC_LAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

gebc::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return gebc::RunConfig{};
  return gebc::load_run_config(path);
}

std::vector<gebc::BoundaryRecord> load_corpus(const std::string& data_dir) {
  const fs::path manifest = fs::path(data_dir) / "manifest.jsonl";
  if (!fs::exists(manifest)) {
    throw gebc::ConfigError("data directory has no manifest.jsonl: " + data_dir);
  }
  return gebc::load_manifest(manifest.string());
}

std::vector<gebc::RecordInput> load_inputs(
    const std::vector<gebc::BoundaryRecord>& records) {
  std::vector<gebc::RecordInput> inputs;
  inputs.reserve(records.size());
  for (const auto& r : records) inputs.push_back(gebc::load_record_input(r));
  return inputs;
}

struct LoadedModel {
  std::unique_ptr<gebc::Model<float>> model;
  gebc::RunConfig config;
  size_t step = 0;
  double best_acc = 0.0;
  uint64_t rng_state = 0;
};

LoadedModel load_checkpoint(const std::string& path) {
  const gebc::NamedTensorMap map = gebc::read_container_file(path);
  json meta;
  try {
    meta = json::parse(map.meta.empty() ? "{}" : map.meta);
  } catch (const json::parse_error& e) {
    throw gebc::DataError(std::string("checkpoint meta is not valid JSON: ") +
                          e.what());
  }
  if (!meta.contains("config") || !meta.contains("vocab")) {
    throw gebc::DataError("checkpoint meta missing config or vocab: " + path);
  }
  LoadedModel out;
  out.config = gebc::parse_run_config(meta["config"].dump());
  gebc::Vocab vocab = gebc::Vocab::from_json(meta["vocab"].dump());
  out.model = gebc::Model<float>::build(out.config.model_config(),
                                        std::move(vocab), out.config.seed);
  out.model->load_values(map);
  out.step = meta.value("step", size_t{0});
  out.best_acc = meta.value("best_acc", 0.0);
  out.rng_state = meta.value("rng_state", uint64_t{0});
  return out;
}

const char* type_name(gebc::CaptionType t) {
  switch (t) {
    case gebc::CaptionType::Subject: return "subject";
    case gebc::CaptionType::Before: return "before";
    case gebc::CaptionType::After: return "after";
  }
  return "?";
}

int cmd_synth(uint64_t seed, size_t n, const std::string& out_dir,
              const gebc::RunConfig& cfg) {
  if (n == 0) throw gebc::ConfigError("synth: --n must be >= 1");
  if (out_dir.empty()) throw gebc::ConfigError("synth: --out is required");
  gebc::synth_corpus(seed, n, cfg.corpus, out_dir);
  std::printf("wrote %zu records to %s\n", n, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, gebc::RunConfig cfg,
              const std::string& out_dir, const std::string& resume_path) {
  const auto records = load_corpus(data_dir);
  const auto inputs = load_inputs(records);

  std::unique_ptr<gebc::Model<float>> model;
  size_t start_step = 0;
  uint64_t rng_state = 0;
  if (!resume_path.empty()) {
    LoadedModel loaded = load_checkpoint(resume_path);
    model = std::move(loaded.model);
    cfg = loaded.config;
    start_step = loaded.step;
    rng_state = loaded.rng_state;
  } else {
    gebc::Vocab vocab = gebc::Vocab::build(gebc::corpus_words(records));
    model = gebc::Model<float>::build(cfg.model_config(), std::move(vocab),
                                      cfg.seed);
  }
  cfg.output_dir = out_dir;
  const gebc::TrainResult result =
      gebc::train(*model, inputs, cfg.train, out_dir,
                  gebc::run_config_to_json(cfg), start_step, rng_state);
  std::printf("best val token top-1 accuracy %.4f at step %zu\n",
              result.best_acc, result.best_step);
  std::printf("checkpoint: %s\n",
              (fs::path(out_dir) / "checkpoint.rvtc").string().c_str());
  return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& data_dir,
                 const gebc::GenConfig& gen, const std::string& out_dir) {
  gen.validate();
  LoadedModel loaded = load_checkpoint(ckpt_path);
  const auto records = load_corpus(data_dir);
  fs::create_directories(out_dir);

  std::vector<gebc::Prediction> preds;
  for (const auto& rec : records) {
    const gebc::RecordInput input = gebc::load_record_input(rec);
    const gebc::StepScorer scorer = gebc::model_scorer(*loaded.model, input);
    for (gebc::CaptionType type :
         {gebc::CaptionType::Subject, gebc::CaptionType::Before,
          gebc::CaptionType::After}) {
      const auto hyps =
          gebc::diverse_beam_decode(scorer, gebc::type_token(type), gen);
      for (size_t rank = 0; rank < hyps.size(); ++rank) {
        gebc::Prediction p;
        p.video_id = rec.video_id;
        p.boundary_id = rec.boundary_id;
        p.type = type_name(type);
        p.rank = int(rank);
        p.caption = gebc::detokenize(hyps[rank].tokens, loaded.model->vocab);
        p.score = hyps[rank].normalized_score(gen.length_penalty_exponent);
        preds.push_back(std::move(p));
      }
    }
  }
  const std::string pred_path =
      (fs::path(out_dir) / "predictions.jsonl").string();
  gebc::write_predictions(pred_path, preds);

  json meta;
  meta["checkpoint"] = ckpt_path;
  meta["checkpoint_step"] = loaded.step;
  meta["beam_size"] = gen.beam_size;
  meta["beam_groups"] = gen.beam_groups;
  meta["diversity_penalty"] = gen.diversity_penalty;
  meta["length_penalty_exponent"] = gen.length_penalty_exponent;
  meta["max_len"] = gen.max_len;
  std::ofstream((fs::path(out_dir) / "generate_meta.json").string())
      << meta.dump(2) << "\n";
  std::printf("wrote %zu predictions to %s\n", preds.size(), pred_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& data_dir,
                 const std::string& out_dir) {
  const auto records = load_corpus(data_dir);
  const auto preds = gebc::load_predictions(pred_path);
  const gebc::MetricReport report = gebc::evaluate_predictions(preds, records);
  fs::create_directories(out_dir);
  std::ofstream((fs::path(out_dir) / "report.json").string())
      << gebc::report_to_json(report) << "\n";
  const std::string table = gebc::report_to_table(report);
  std::ofstream((fs::path(out_dir) / "report.txt").string()) << table;
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_report(const std::string& metrics_path) {
  std::ifstream in(metrics_path);
  if (!in) throw gebc::DataError("cannot open metrics CSV: " + metrics_path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,", 0) != 0) {
    throw gebc::DataError("not a metrics CSV (bad header): " + metrics_path);
  }
  struct Row {
    size_t step;
    double l_con, l_cap, l_total, val_acc, lr;
    bool has_val;
  };
  std::vector<Row> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 6) fields.push_back("");
    try {
      Row r{};
      r.step = std::stoul(fields[0]);
      r.l_con = std::stod(fields[1]);
      r.l_cap = std::stod(fields[2]);
      r.l_total = std::stod(fields[3]);
      r.has_val = !fields[4].empty();
      r.val_acc = r.has_val ? std::stod(fields[4]) : 0.0;
      r.lr = std::stod(fields[5]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw gebc::DataError("metrics CSV line " + std::to_string(line_no) +
                            ": malformed row");
    }
  }
  if (rows.empty()) throw gebc::DataError("metrics CSV has no rows");

  double best_acc = -1;
  size_t best_step = 0;
  for (const auto& r : rows) {
    if (r.has_val && r.val_acc > best_acc) {
      best_acc = r.val_acc;
      best_step = r.step;
    }
  }
  std::printf("%-8s %12s %12s %12s %10s %12s\n", "step", "l_total", "l_cap",
              "l_con", "val_acc", "lr");
  const size_t stride = rows.size() > 20 ? rows.size() / 20 : 1;
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (i % stride != 0 && i + 1 != rows.size() && !r.has_val) continue;
    char acc[32] = "-";
    if (r.has_val) std::snprintf(acc, sizeof(acc), "%.4f", r.val_acc);
    std::printf("%-8zu %12.5f %12.5f %12.5f %10s %12.3e\n", r.step, r.l_total,
                r.l_cap, r.l_con, acc, r.lr);
  }
  std::printf("final loss %.5f at step %zu", rows.back().l_total,
              rows.back().step);
  if (best_acc >= 0) {
    std::printf("; best val token top-1 accuracy %.4f at step %zu", best_acc,
                best_step);
  }
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();

  CLI::App app{"Video boundary caption lab: synthetic corpus, training, "
               "generation, and caption metrics"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic boundary-caption corpus");
  uint64_t synth_seed = 0;
  size_t synth_n = 64;
  std::string synth_out, synth_cfg_path;
  synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
  synth->add_option("--n", synth_n, "Number of boundary records")->capture_default_str();
  synth->add_option("--out", synth_out, "Output corpus directory")->required();
  synth->add_option("--config", synth_cfg_path, "Run config JSON file");

  // train
  auto* train = app.add_subcommand("train", "Train the captioner on a corpus");
  std::string train_data, train_cfg_path, train_out = "out", train_resume;
  uint64_t train_seed = 0;
  bool train_seed_set = false;
  train->add_option("--data", train_data, "Corpus directory (with manifest.jsonl)")->required();
  train->add_option("--config", train_cfg_path, "Run config JSON file");
  train->add_option("--out", train_out, "Output directory")->capture_default_str();
  train->add_option("--resume", train_resume, "Checkpoint to resume from");
  train->add_option("--seed", train_seed, "RNG seed (overrides config)")
      ->each([&](const std::string&) { train_seed_set = true; });
  size_t train_steps = 0;
  train->add_option("--steps", train_steps, "Total optimizer steps (overrides config)");
  double train_target_acc = 0.0;
  train->add_option("--target-acc", train_target_acc,
                    "Stop early once validation accuracy reaches this value");

  // generate
  auto* gen = app.add_subcommand("generate", "Decode captions with a trained checkpoint");
  std::string gen_ckpt, gen_data, gen_cfg_path, gen_out = "out";
  gen->add_option("--ckpt", gen_ckpt, "Checkpoint .rvtc file")->required();
  gen->add_option("--data", gen_data, "Corpus directory")->required();
  gen->add_option("--gen-config", gen_cfg_path, "Run config JSON (gen section)");
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gebc::GenConfig gen_flags;
  gen->add_option("--beam-size", gen_flags.beam_size, "Beam width")->capture_default_str();
  gen->add_option("--beam-groups", gen_flags.beam_groups, "Diverse beam groups")->capture_default_str();
  gen->add_option("--diversity-penalty", gen_flags.diversity_penalty, "Hamming diversity penalty")->capture_default_str();
  gen->add_option("--max-len", gen_flags.max_len, "Maximum sequence length")->capture_default_str();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against corpus references");
  std::string eval_pred, eval_data, eval_out = "out";
  eval->add_option("--pred", eval_pred, "predictions.jsonl path")->required();
  eval->add_option("--data", eval_data, "Corpus directory")->required();
  eval->add_option("--out", eval_out, "Output directory")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Render a metrics CSV as a text summary");
  std::string report_metrics;
  report->add_option("--metrics", report_metrics, "metrics.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      return cmd_synth(synth_seed, synth_n, synth_out,
                       load_config_or_default(synth_cfg_path));
    }
    if (*train) {
      gebc::RunConfig cfg = load_config_or_default(train_cfg_path);
      if (train_seed_set) {
        cfg.seed = train_seed;
        cfg.train.seed = train_seed;
      }
      if (train->count("--steps")) cfg.train.steps = train_steps;
      if (train->count("--target-acc")) cfg.train.target_acc = train_target_acc;
      return cmd_train(train_data, cfg, train_out, train_resume);
    }
    if (*gen) {
      gebc::GenConfig g = gen_cfg_path.empty()
                              ? gebc::GenConfig{}
                              : gebc::load_run_config(gen_cfg_path).gen;
      if (gen->count("--beam-size")) g.beam_size = gen_flags.beam_size;
      if (gen->count("--beam-groups")) g.beam_groups = gen_flags.beam_groups;
      if (gen->count("--diversity-penalty")) g.diversity_penalty = gen_flags.diversity_penalty;
      if (gen->count("--max-len")) g.max_len = gen_flags.max_len;
      return cmd_generate(gen_ckpt, gen_data, g, gen_out);
    }
    if (*eval) return cmd_evaluate(eval_pred, eval_data, eval_out);
    if (*report) return cmd_report(report_metrics);
  } catch (const gebc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const gebc::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const gebc::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  }
  return 0;
}

#include "gebc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

using json = nlohmann::json;

namespace gebc {

namespace {

void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("config: unknown key '" + it.key() + "' in section '" +
                        section + "'");
    }
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  check_keys(j, "(root)",
             {"seed", "output_dir", "corpus", "encoder", "decoder", "fusion",
              "lora", "train", "gen", "eval"});
  RunConfig cfg;
  get(j, "seed", cfg.seed);
  get(j, "output_dir", cfg.output_dir);
  if (j.contains("corpus")) {
    const json& c = j["corpus"];
    check_keys(c, "corpus",
               {"resolution", "c_seg", "n_shapes", "min_before", "max_before",
                "min_after", "max_after"});
    get(c, "resolution", cfg.corpus.resolution);
    get(c, "c_seg", cfg.corpus.c_seg);
    get(c, "n_shapes", cfg.corpus.n_shapes);
    get(c, "min_before", cfg.corpus.min_before);
    get(c, "max_before", cfg.corpus.max_before);
    get(c, "min_after", cfg.corpus.min_after);
    get(c, "max_after", cfg.corpus.max_after);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e, "encoder", {"d", "patch", "layers", "heads", "c_seg", "resolution"});
    get(e, "d", cfg.encoder.d);
    get(e, "patch", cfg.encoder.patch);
    get(e, "layers", cfg.encoder.layers);
    get(e, "heads", cfg.encoder.heads);
    get(e, "c_seg", cfg.encoder.c_seg);
    get(e, "resolution", cfg.encoder.resolution);
  }
  if (j.contains("decoder")) {
    const json& d = j["decoder"];
    check_keys(d, "decoder", {"layers", "heads"});
    get(d, "layers", cfg.decoder.layers);
    get(d, "heads", cfg.decoder.heads);
  }
  if (j.contains("fusion")) {
    const json& f = j["fusion"];
    check_keys(f, "fusion", {"n_queries", "heads"});
    get(f, "n_queries", cfg.fusion.n_queries);
    get(f, "heads", cfg.fusion.heads);
  }
  if (j.contains("lora")) {
    const json& l = j["lora"];
    check_keys(l, "lora", {"enabled", "rank", "alpha", "dropout"});
    get(l, "enabled", cfg.lora.enabled);
    get(l, "rank", cfg.lora.rank);
    get(l, "alpha", cfg.lora.alpha);
    get(l, "dropout", cfg.lora.dropout);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train",
               {"steps", "batch", "warmup_steps", "optimizer", "beta1",
                "weight_decay", "lr_peak", "temperature_init", "eval_interval",
                "target_acc", "lambda_cap", "lambda_con"});
    get(t, "steps", cfg.train.steps);
    get(t, "batch", cfg.train.batch);
    get(t, "warmup_steps", cfg.train.warmup_steps);
    get(t, "optimizer", cfg.train.optimizer);
    get(t, "beta1", cfg.train.beta1);
    get(t, "weight_decay", cfg.train.weight_decay);
    get(t, "lr_peak", cfg.train.lr_peak);
    get(t, "temperature_init", cfg.train.temperature_init);
    get(t, "eval_interval", cfg.train.eval_interval);
    get(t, "target_acc", cfg.train.target_acc);
    get(t, "lambda_cap", cfg.train.weights.lambda_cap);
    get(t, "lambda_con", cfg.train.weights.lambda_con);
  }
  if (j.contains("gen")) {
    const json& g = j["gen"];
    check_keys(g, "gen",
               {"max_len", "beam_size", "beam_groups", "diversity_penalty",
                "length_penalty_exponent"});
    get(g, "max_len", cfg.gen.max_len);
    get(g, "beam_size", cfg.gen.beam_size);
    get(g, "beam_groups", cfg.gen.beam_groups);
    get(g, "diversity_penalty", cfg.gen.diversity_penalty);
    get(g, "length_penalty_exponent", cfg.gen.length_penalty_exponent);
  }
  if (j.contains("eval")) {
    check_keys(j["eval"], "eval", {});
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["corpus"] = {{"resolution", cfg.corpus.resolution},
                 {"c_seg", cfg.corpus.c_seg},
                 {"n_shapes", cfg.corpus.n_shapes},
                 {"min_before", cfg.corpus.min_before},
                 {"max_before", cfg.corpus.max_before},
                 {"min_after", cfg.corpus.min_after},
                 {"max_after", cfg.corpus.max_after}};
  j["encoder"] = {{"d", cfg.encoder.d},
                  {"patch", cfg.encoder.patch},
                  {"layers", cfg.encoder.layers},
                  {"heads", cfg.encoder.heads},
                  {"c_seg", cfg.encoder.c_seg},
                  {"resolution", cfg.encoder.resolution}};
  j["decoder"] = {{"layers", cfg.decoder.layers}, {"heads", cfg.decoder.heads}};
  j["fusion"] = {{"n_queries", cfg.fusion.n_queries}, {"heads", cfg.fusion.heads}};
  j["lora"] = {{"enabled", cfg.lora.enabled},
               {"rank", cfg.lora.rank},
               {"alpha", cfg.lora.alpha},
               {"dropout", cfg.lora.dropout}};
  j["train"] = {{"steps", cfg.train.steps},
                {"batch", cfg.train.batch},
                {"warmup_steps", cfg.train.warmup_steps},
                {"optimizer", cfg.train.optimizer},
                {"beta1", cfg.train.beta1},
                {"weight_decay", cfg.train.weight_decay},
                {"lr_peak", cfg.train.lr_peak},
                {"temperature_init", cfg.train.temperature_init},
                {"eval_interval", cfg.train.eval_interval},
                {"target_acc", cfg.train.target_acc},
                {"lambda_cap", cfg.train.weights.lambda_cap},
                {"lambda_con", cfg.train.weights.lambda_con}};
  j["gen"] = {{"max_len", cfg.gen.max_len},
              {"beam_size", cfg.gen.beam_size},
              {"beam_groups", cfg.gen.beam_groups},
              {"diversity_penalty", cfg.gen.diversity_penalty},
              {"length_penalty_exponent", cfg.gen.length_penalty_exponent}};
  return j.dump(2);
}

}  // namespace gebc

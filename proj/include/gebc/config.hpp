#pragma once

#include <string>

#include "gebc/corpus.hpp"
#include "gebc/generation.hpp"
#include "gebc/model.hpp"
#include "gebc/train.hpp"

namespace gebc {

// Nested run configuration: every field has a default; unknown keys are
// rejected. Single JSON document on disk; CLI flags override file values.
struct RunConfig {
  uint64_t seed = 0;
  std::string output_dir = "out";
  SynthConfig corpus;
  EncoderConfig encoder;
  struct DecoderSection {
    size_t layers = 2;
    size_t heads = 4;
  } decoder;
  FusionConfig fusion;
  LoraConfig lora;
  TrainConfig train;
  GenConfig gen;

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.encoder = encoder;
    mc.decoder.d = encoder.d;
    mc.decoder.layers = decoder.layers;
    mc.decoder.heads = decoder.heads;
    mc.decoder.max_len = kMaxSeqLen;
    mc.fusion = fusion;
    mc.lora = lora;
    mc.temperature_init = train.temperature_init;
    return mc;
  }
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace gebc

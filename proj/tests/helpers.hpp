#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gebc/config.hpp"
#include "gebc/model.hpp"

namespace gebc::testutil {

// Small-but-complete model shape used across the suites: 16-d encoder over
// 16x16 frames, 2 vision layers so LoRA covers multiple blocks.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.encoder.d = 16;
  cfg.encoder.patch = 4;
  cfg.encoder.layers = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.c_seg = 8;
  cfg.encoder.resolution = 16;
  cfg.decoder.d = 16;
  cfg.decoder.layers = 1;
  cfg.decoder.heads = 2;
  cfg.fusion.n_queries = 4;
  cfg.fusion.heads = 2;
  return cfg;
}

struct TinyCorpus {
  std::vector<BoundaryRecord> records;
  std::vector<RecordInput> inputs;
  Vocab vocab;
};

inline TinyCorpus make_tiny_corpus(const std::string& tag, size_t n = 16,
                                   uint64_t seed = 5) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("gebc_tiny_" + tag);
  fs::remove_all(dir);
  SynthConfig cfg;
  cfg.resolution = 16;
  synth_corpus(seed, n, cfg, dir.string());
  TinyCorpus out;
  out.records = load_manifest((dir / "manifest.jsonl").string());
  for (const auto& r : out.records) out.inputs.push_back(load_record_input(r));
  out.vocab = Vocab::build(corpus_words(out.records));
  return out;
}

}  // namespace gebc::testutil

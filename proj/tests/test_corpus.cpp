#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gebc/corpus.hpp"
#include "gebc/serialization.hpp"

using namespace gebc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Concatenated bytes of every regular file, in sorted path order.
std::string dir_fingerprint(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    all += f.lexically_relative(dir).string();
    all += '\0';
    all += slurp(f);
  }
  return all;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synth is deterministic: two runs are byte-identical") {
  const auto d1 = fresh_dir("gebc_corpus_det1");
  const auto d2 = fresh_dir("gebc_corpus_det2");
  synth_corpus(7, 6, SynthConfig{}, d1.string());
  synth_corpus(7, 6, SynthConfig{}, d2.string());
  CHECK(dir_fingerprint(d1) == dir_fingerprint(d2));

  const auto d3 = fresh_dir("gebc_corpus_det3");
  synth_corpus(8, 6, SynthConfig{}, d3.string());
  CHECK(dir_fingerprint(d1) != dir_fingerprint(d3));  // seed matters
}

TEST_CASE("synth output loads back with the declared invariants") {
  const auto dir = fresh_dir("gebc_corpus_load");
  SynthConfig cfg;
  synth_corpus(3, 10, cfg, dir.string());
  const auto records = load_manifest((dir / "manifest.jsonl").string());
  REQUIRE(records.size() == 10);
  for (const auto& r : records) {
    CHECK(r.frames_before.size() >= size_t(cfg.min_before));
    CHECK(r.frames_before.size() <= size_t(cfg.max_before));
    CHECK(r.frames_after.size() >= size_t(cfg.min_after));
    CHECK(r.frames_after.size() <= size_t(cfg.max_after));
    CHECK(r.seg_masks.size() == r.frame_count());

    const Tensor<uint8_t> frame = load_frame(r.resolve(r.boundary_frame));
    CHECK(frame.dims == std::vector<size_t>{3, 32, 32});
    const Tensor<int64_t> mask =
        load_mask(r.resolve(r.seg_masks[r.frames_before.size()]));
    CHECK(mask.dims == std::vector<size_t>{32, 32});
    int64_t max_id = 0;
    for (int64_t v : mask.data) {
      CHECK(v >= 0);
      max_id = std::max(max_id, v);
    }
    CHECK(max_id >= 1);  // the subject is present in the boundary frame
    CHECK(max_id < int64_t(cfg.c_seg));

    const Tensor<float> tsn = load_tsn(r.resolve(r.tsn_before_path));
    CHECK(tsn.numel() == kTsnDim);
  }
}

TEST_CASE("caption phrases come from the fixed template grammar") {
  const auto dir = fresh_dir("gebc_corpus_words");
  synth_corpus(5, 12, SynthConfig{}, dir.string());
  const auto records = load_manifest((dir / "manifest.jsonl").string());
  const auto words = corpus_words(records);
  CHECK(std::is_sorted(words.begin(), words.end()));
  CHECK(std::adjacent_find(words.begin(), words.end()) == words.end());
  for (const auto& r : records) {
    CHECK(r.captions.subject.rfind("the ", 0) == 0);
    CHECK(r.captions.status_before.rfind("is ", 0) == 0);
    CHECK(r.captions.status_after.rfind("is ", 0) == 0);
  }
}

TEST_CASE("stride_indices subsamples uniformly") {
  CHECK(stride_indices(20, 10) ==
        std::vector<size_t>{0, 2, 4, 6, 8, 10, 12, 14, 16, 18});
  CHECK(stride_indices(3, 10) == std::vector<size_t>{0, 1, 2});
  CHECK(stride_indices(10, 10) == std::vector<size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(stride_indices(7, 3) == std::vector<size_t>{0, 2, 4});
}

TEST_CASE("sample_frames keeps before/boundary/after alignment") {
  BoundaryRecord r;
  for (int i = 0; i < 4; ++i) r.frames_before.push_back("b" + std::to_string(i));
  r.boundary_frame = "c";
  for (int i = 0; i < 2; ++i) r.frames_after.push_back("a" + std::to_string(i));
  for (int i = 0; i < 7; ++i) r.seg_masks.push_back("m" + std::to_string(i));

  const SampledFrames s = sample_frames(r, 2);
  CHECK(s.frame_paths == std::vector<std::string>{"b0", "b2", "c", "a0", "a1"});
  CHECK(s.mask_paths == std::vector<std::string>{"m0", "m2", "m4", "m5", "m6"});
  CHECK(s.sides == std::vector<Side>{Side::Before, Side::Before, Side::Boundary,
                                     Side::After, Side::After});
}

TEST_CASE("manifest validation errors carry the line number") {
  const auto dir = fresh_dir("gebc_corpus_bad");
  synth_corpus(1, 3, SynthConfig{}, dir.string());
  const fs::path manifest = dir / "manifest.jsonl";

  SUBCASE("malformed JSON") {
    std::string text = slurp(manifest);
    std::ofstream(manifest) << text.substr(0, text.find('\n') + 1) << "{oops\n";
    try {
      load_manifest(manifest.string());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("missing referenced file") {
    fs::remove(dir / "frames" / "r0001_c.rvtc");
    try {
      load_manifest(manifest.string());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("missing referenced file") != std::string::npos);
    }
  }
  SUBCASE("empty before side rejected") {
    std::string text = slurp(manifest);
    const size_t pos = text.find("\"frames_before\":[\"frames/r0000");
    REQUIRE(pos != std::string::npos);
    // Empty the array for record 0.
    const size_t close = text.find(']', pos);
    text.erase(pos + sizeof("\"frames_before\":[") - 1,
               close - pos - (sizeof("\"frames_before\":[") - 1));
    std::ofstream(manifest) << text;
    CHECK_THROWS_AS(load_manifest(manifest.string()), DataError);
  }
  SUBCASE("tsn of wrong length rejected") {
    const auto records = load_manifest(manifest.string());
    NamedTensorMap m;
    m.add("tsn", TensorBlob::from_f32(Tensor<float>({16})));
    write_container_file(m, records[0].resolve(records[0].tsn_before_path));
    try {
      load_manifest(manifest.string());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("2048") != std::string::npos);
    }
  }
}

TEST_CASE("synth rejects bad configuration") {
  const auto dir = fresh_dir("gebc_corpus_cfgerr");
  CHECK_THROWS_AS(synth_corpus(0, 0, SynthConfig{}, dir.string()), ConfigError);
  SynthConfig bad;
  bad.min_before = 0;
  CHECK_THROWS_AS(synth_corpus(0, 1, bad, dir.string()), ConfigError);
  bad = SynthConfig{};
  bad.max_after = 11;
  CHECK_THROWS_AS(synth_corpus(0, 1, bad, dir.string()), ConfigError);
  bad = SynthConfig{};
  bad.n_shapes = 4;
  CHECK_THROWS_AS(synth_corpus(0, 1, bad, dir.string()), ConfigError);
}

#include "gebc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gebc/rng.hpp"
#include "gebc/serialization.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace gebc {

std::string BoundaryRecord::resolve(const std::string& rel) const {
  return (fs::path(base_dir) / rel).string();
}

namespace {

struct Palette {
  const char* name;
  uint8_t rgb[3];
};
constexpr Palette kColors[] = {
    {"red", {220, 40, 40}},
    {"green", {40, 200, 40}},
    {"blue", {60, 80, 230}},
    {"yellow", {230, 220, 40}},
};
constexpr const char* kShapes[] = {"circle", "square", "triangle"};

// Per action: (status_before, status_after) phrases and start/end attribute.
struct Action {
  const char* before_phrase;
  const char* after_phrase;
};
constexpr Action kActions[] = {
    {"is on the left side", "is on the right side"},
    {"is on the right side", "is on the left side"},
    {"is small in size", "is large in size"},
    {"is large in size", "is small in size"},
    {"is near the top edge", "is near the bottom edge"},
    {"is near the bottom edge", "is near the top edge"},
};
constexpr size_t kNumActions = sizeof(kActions) / sizeof(kActions[0]);

struct ShapeState {
  double cx, cy, r;
};

// Attribute interpolation for action `a` at phase t in [0,1].
ShapeState state_at(int action, double t, int res) {
  const double mid = res / 2.0;
  const double lo = res * 0.28, hi = res * 0.72;
  const double r_small = res * 0.14, r_large = res * 0.33, r_mid = res * 0.24;
  ShapeState s{mid, mid, r_mid};
  switch (action) {
    case 0: s.cx = lo + (hi - lo) * t; break;
    case 1: s.cx = hi - (hi - lo) * t; break;
    case 2: s.r = r_small + (r_large - r_small) * t; break;
    case 3: s.r = r_large - (r_large - r_small) * t; break;
    case 4: s.cy = lo + (hi - lo) * t; break;
    case 5: s.cy = hi - (hi - lo) * t; break;
    default: break;
  }
  return s;
}

bool inside_shape(int shape, double x, double y, const ShapeState& s) {
  const double dx = x - s.cx, dy = y - s.cy;
  switch (shape) {
    case 0: return dx * dx + dy * dy <= s.r * s.r;
    case 1: return std::abs(dx) <= s.r * 0.9 && std::abs(dy) <= s.r * 0.9;
    case 2: {
      if (dy < -s.r || dy > s.r) return false;
      const double half_width = (dy + s.r) * 0.55;
      return std::abs(dx) <= half_width;
    }
    default: return false;
  }
}

void render(int shape, int color, const ShapeState& st, int res, Rng& rng,
            Tensor<uint8_t>& frame, Tensor<int64_t>& mask, int64_t class_id) {
  frame = Tensor<uint8_t>({3, size_t(res), size_t(res)});
  mask = Tensor<int64_t>({size_t(res), size_t(res)});
  const uint8_t* rgb = kColors[color].rgb;
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const bool in = inside_shape(shape, x + 0.5, y + 0.5, st);
      mask.data[y * res + x] = in ? class_id : 0;
      for (int ch = 0; ch < 3; ++ch) {
        const double base = in ? double(rgb[ch]) : 30.0;
        const double noisy = base + rng.uniform(-8.0, 8.0);
        frame.data[(ch * res + y) * res + x] =
            uint8_t(std::clamp(noisy, 0.0, 255.0));
      }
    }
  }
}

void write_frame(const std::string& path, const Tensor<uint8_t>& frame) {
  NamedTensorMap m;
  m.add("pixels", TensorBlob::from_u8(frame));
  write_container_file(m, path);
}

void write_mask(const std::string& path, const Tensor<int64_t>& mask) {
  NamedTensorMap m;
  m.add("class_ids", TensorBlob::from_i64(mask));
  write_container_file(m, path);
}

Tensor<float> make_tsn(int action, int side_tag) {
  Rng rng(splitmix64(0x7453AFull * (uint64_t(action) + 1) + uint64_t(side_tag)));
  Tensor<float> t({kTsnDim});
  for (auto& v : t.data) v = float(rng.normal());
  return t;
}

size_t count_words(const std::string& s) {
  std::istringstream iss(s);
  std::string w;
  size_t n = 0;
  while (iss >> w) ++n;
  return n;
}

void validate_record(const BoundaryRecord& r, size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw DataError("manifest line " + std::to_string(line_no) + " (" +
                    r.boundary_id + "): " + what);
  };
  if (r.frames_before.empty() || r.frames_before.size() > kMaxFramesPerSide) {
    fail("frames_before count " + std::to_string(r.frames_before.size()) +
         " outside [1, 10]");
  }
  if (r.frames_after.empty() || r.frames_after.size() > kMaxFramesPerSide) {
    fail("frames_after count " + std::to_string(r.frames_after.size()) +
         " outside [1, 10]");
  }
  if (r.seg_masks.size() != r.frame_count()) {
    fail("seg_masks count " + std::to_string(r.seg_masks.size()) +
         " != frame count " + std::to_string(r.frame_count()));
  }
  if (r.captions.subject.empty() || r.captions.status_before.empty() ||
      r.captions.status_after.empty()) {
    fail("captions must be non-empty");
  }
  for (const std::string* c : {&r.captions.subject, &r.captions.status_before,
                               &r.captions.status_after}) {
    if (count_words(*c) > kMaxCaptionTokens) fail("caption exceeds 126 tokens");
  }
  for (const auto& p : r.frames_before) {
    if (!fs::exists(r.resolve(p))) fail("missing referenced file " + p);
  }
  if (!fs::exists(r.resolve(r.boundary_frame))) {
    fail("missing referenced file " + r.boundary_frame);
  }
  for (const auto& p : r.frames_after) {
    if (!fs::exists(r.resolve(p))) fail("missing referenced file " + p);
  }
  for (const auto& p : r.seg_masks) {
    if (!fs::exists(r.resolve(p))) fail("missing referenced file " + p);
  }
  for (const std::string* p : {&r.tsn_before_path, &r.tsn_after_path}) {
    if (!fs::exists(r.resolve(*p))) fail("missing referenced file " + *p);
    const Tensor<float> t = load_tsn(r.resolve(*p));
    if (t.numel() != kTsnDim) {
      fail("tsn vector length " + std::to_string(t.numel()) + " != 2048");
    }
  }
}

}  // namespace

void synth_corpus(uint64_t seed, size_t n_records, const SynthConfig& config,
                  const std::string& out_dir) {
  if (n_records < 1) throw ConfigError("synth: n_records must be >= 1");
  if (config.n_shapes < 1) throw ConfigError("synth: zero shapes configured");
  if (config.n_shapes > 3) throw ConfigError("synth: at most 3 shapes supported");
  if (config.min_before < 1 || size_t(config.max_before) > kMaxFramesPerSide ||
      config.min_before > config.max_before || config.min_after < 1 ||
      size_t(config.max_after) > kMaxFramesPerSide ||
      config.min_after > config.max_after) {
    throw ConfigError("synth: frame count bounds outside [1, 10]");
  }
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "frames", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  fs::create_directories(fs::path(out_dir) / "tsn", ec);
  if (!fs::is_directory(out_dir)) throw DataError("synth: unwritable directory " + out_dir);

  std::ofstream manifest((fs::path(out_dir) / "manifest.jsonl").string(),
                         std::ios::trunc);
  if (!manifest) throw DataError("synth: cannot write manifest in " + out_dir);

  const int res = config.resolution;
  for (size_t idx = 0; idx < n_records; ++idx) {
    Rng rng(splitmix64(splitmix64(seed) ^ (idx + 1)));
    const int shape = int(rng.below(uint64_t(config.n_shapes)));
    const int color = int(rng.below(4));
    const int action = int(rng.below(kNumActions));
    const int n_bef =
        config.min_before + int(rng.below(uint64_t(config.max_before - config.min_before + 1)));
    const int n_aft =
        config.min_after + int(rng.below(uint64_t(config.max_after - config.min_after + 1)));
    const int64_t class_id = shape + 1;

    char rid[32];
    std::snprintf(rid, sizeof(rid), "r%04zu", idx);

    BoundaryRecord rec;
    rec.video_id = std::string("vid_") + rid;
    rec.boundary_id = std::string("bnd_") + rid;
    rec.captions.subject =
        std::string("the ") + kColors[color].name + " " + kShapes[shape];
    rec.captions.status_before = kActions[action].before_phrase;
    rec.captions.status_after = kActions[action].after_phrase;

    auto emit = [&](Side side, int j, double phase) {
      ShapeState st = state_at(action, phase, res);
      st.cx += rng.uniform(-1.0, 1.0);
      st.cy += rng.uniform(-1.0, 1.0);
      Tensor<uint8_t> frame;
      Tensor<int64_t> mask;
      render(shape, color, st, res, rng, frame, mask, class_id);
      const char* tag = side == Side::Before ? "b" : side == Side::After ? "a" : "c";
      std::string fname = std::string("frames/") + rid + "_" + tag +
                          (side == Side::Boundary ? "" : std::to_string(j)) +
                          ".rvtc";
      std::string mname = std::string("masks/") + rid + "_" + tag +
                          (side == Side::Boundary ? "" : std::to_string(j)) +
                          ".rvtc";
      write_frame((fs::path(out_dir) / fname).string(), frame);
      write_mask((fs::path(out_dir) / mname).string(), mask);
      rec.seg_masks.push_back(mname);
      return fname;
    };

    // Before frames span phase [0, 0.35], after [0.65, 1], boundary at 0.5.
    for (int j = 0; j < n_bef; ++j) {
      const double phase = n_bef == 1 ? 0.2 : 0.35 * double(j) / double(n_bef - 1);
      rec.frames_before.push_back(emit(Side::Before, j, phase));
    }
    rec.boundary_frame = emit(Side::Boundary, 0, 0.5);
    for (int j = 0; j < n_aft; ++j) {
      const double phase =
          n_aft == 1 ? 0.8 : 0.65 + 0.35 * double(j) / double(n_aft - 1);
      rec.frames_after.push_back(emit(Side::After, j, phase));
    }

    rec.tsn_before_path = std::string("tsn/") + rid + "_before.rvtc";
    rec.tsn_after_path = std::string("tsn/") + rid + "_after.rvtc";
    {
      NamedTensorMap m;
      m.add("tsn", TensorBlob::from_f32(make_tsn(action, 0)));
      write_container_file(m, (fs::path(out_dir) / rec.tsn_before_path).string());
    }
    {
      NamedTensorMap m;
      m.add("tsn", TensorBlob::from_f32(make_tsn(action, 1)));
      write_container_file(m, (fs::path(out_dir) / rec.tsn_after_path).string());
    }

    json line;
    line["video_id"] = rec.video_id;
    line["boundary_id"] = rec.boundary_id;
    line["frames_before"] = rec.frames_before;
    line["boundary_frame"] = rec.boundary_frame;
    line["frames_after"] = rec.frames_after;
    line["seg_masks"] = rec.seg_masks;
    line["tsn_before"] = rec.tsn_before_path;
    line["tsn_after"] = rec.tsn_after_path;
    line["captions"] = {{"subject", rec.captions.subject},
                        {"status_before", rec.captions.status_before},
                        {"status_after", rec.captions.status_after}};
    manifest << line.dump() << "\n";
  }
}

std::vector<BoundaryRecord> load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path);
  const std::string base = fs::path(manifest_path).parent_path().string();
  std::vector<BoundaryRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    }
    BoundaryRecord r;
    r.base_dir = base;
    try {
      r.video_id = j.at("video_id").get<std::string>();
      r.boundary_id = j.at("boundary_id").get<std::string>();
      r.frames_before = j.at("frames_before").get<std::vector<std::string>>();
      r.boundary_frame = j.at("boundary_frame").get<std::string>();
      r.frames_after = j.at("frames_after").get<std::vector<std::string>>();
      r.seg_masks = j.at("seg_masks").get<std::vector<std::string>>();
      r.tsn_before_path = j.at("tsn_before").get<std::string>();
      r.tsn_after_path = j.at("tsn_after").get<std::string>();
      const auto& c = j.at("captions");
      r.captions.subject = c.at("subject").get<std::string>();
      r.captions.status_before = c.at("status_before").get<std::string>();
      r.captions.status_after = c.at("status_after").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": bad record: " + e.what());
    }
    validate_record(r, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<size_t> stride_indices(size_t n, size_t max_count) {
  std::vector<size_t> idx;
  if (n <= max_count) {
    for (size_t i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (size_t i = 0; i < max_count; ++i) idx.push_back(i * n / max_count);
  }
  return idx;
}

SampledFrames sample_frames(const BoundaryRecord& record, size_t max_per_side) {
  SampledFrames out;
  const size_t n_frames = record.frame_count();
  if (record.seg_masks.size() != n_frames) {
    throw DataError("sample_frames: seg mask count mismatch");
  }
  const size_t boundary_pos = record.frames_before.size();
  for (size_t i : stride_indices(record.frames_before.size(), max_per_side)) {
    out.frame_paths.push_back(record.frames_before[i]);
    out.mask_paths.push_back(record.seg_masks[i]);
    out.sides.push_back(Side::Before);
  }
  out.frame_paths.push_back(record.boundary_frame);
  out.mask_paths.push_back(record.seg_masks[boundary_pos]);
  out.sides.push_back(Side::Boundary);
  for (size_t i : stride_indices(record.frames_after.size(), max_per_side)) {
    out.frame_paths.push_back(record.frames_after[i]);
    out.mask_paths.push_back(record.seg_masks[boundary_pos + 1 + i]);
    out.sides.push_back(Side::After);
  }
  return out;
}

Tensor<uint8_t> load_frame(const std::string& path) {
  return read_container_file(path).get("pixels").to_u8();
}

Tensor<int64_t> load_mask(const std::string& path) {
  return read_container_file(path).get("class_ids").to_i64();
}

Tensor<float> load_tsn(const std::string& path) {
  return read_container_file(path).get("tsn").to_f32();
}

std::vector<std::string> corpus_words(const std::vector<BoundaryRecord>& records) {
  std::set<std::string> words;
  for (const auto& r : records) {
    for (const std::string* c : {&r.captions.subject, &r.captions.status_before,
                                 &r.captions.status_after}) {
      std::istringstream iss(*c);
      std::string w;
      while (iss >> w) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char ch) { return char(std::tolower(ch)); });
        words.insert(w);
      }
    }
  }
  return {words.begin(), words.end()};
}

}  // namespace gebc

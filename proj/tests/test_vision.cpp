#include <cmath>

#include "doctest.h"
#include "gebc/vision.hpp"

using namespace gebc;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.d = 16;
  cfg.patch = 4;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.c_seg = 4;
  cfg.resolution = 8;
  return cfg;
}

Tensor<uint8_t> random_frame(size_t res, uint64_t seed) {
  Rng rng(seed);
  Tensor<uint8_t> f({3, res, res});
  for (auto& v : f.data) v = uint8_t(rng.below(256));
  return f;
}

Tensor<int64_t> random_mask(size_t res, size_t c_seg, uint64_t seed) {
  Rng rng(seed);
  Tensor<int64_t> m({res, res});
  for (auto& v : m.data) v = int64_t(rng.below(c_seg));
  return m;
}

}  // namespace

TEST_CASE("a 32x32 frame with 4x4 patches yields 64 patch rows") {
  EncoderConfig cfg;  // desk defaults
  CHECK(cfg.patches_per_frame() == 64);
  const Tensor<float> p = patchify_frame<float>(random_frame(32, 1), 4);
  CHECK(p.rows() == 64);
  CHECK(p.cols() == 3 * 16);
}

TEST_CASE("patchify scales pixels to [-1, 1] in channel-major patch order") {
  Tensor<uint8_t> f({3, 4, 4});
  f.fill(0);
  f.data[0] = 255;  // channel 0, pixel (0,0)
  const Tensor<float> p = patchify_frame<float>(f, 4);
  REQUIRE(p.rows() == 1);
  CHECK(p.data[0] == doctest::Approx(1.0));
  for (size_t i = 1; i < p.data.size(); ++i) {
    CHECK(p.data[i] == doctest::Approx(-1.0));
  }
}

TEST_CASE("patchify_mask one-hot encodes class ids and rejects out-of-range") {
  Tensor<int64_t> m({4, 4});
  m.fill(0);
  m.data[0] = 2;
  const Tensor<float> oh = patchify_mask<float>(m, 4, 4);
  REQUIRE(oh.rows() == 1);
  CHECK(oh.data[2 * 16 + 0] == 1.0f);  // class 2 plane, position 0
  CHECK(oh.data[0] == 0.0f);           // class 0 plane, position 0
  double sum = 0;
  for (float v : oh.data) sum += v;
  CHECK(sum == doctest::Approx(16.0));  // exactly one class per pixel

  m.data[5] = 9;
  CHECK_THROWS_AS(patchify_mask<float>(m, 4, 4), DataError);
}

TEST_CASE("frame slot assignment anchors the boundary at slot 10") {
  // 3 before, boundary, 2 after
  const std::vector<Side> sides = {Side::Before, Side::Before, Side::Before,
                                   Side::Boundary, Side::After, Side::After};
  CHECK(frame_slots(sides) == std::vector<size_t>{7, 8, 9, 10, 11, 12});

  // full occupancy
  std::vector<Side> full(10, Side::Before);
  full.push_back(Side::Boundary);
  full.insert(full.end(), 10, Side::After);
  const auto slots = frame_slots(full);
  CHECK(slots.front() == 0);
  CHECK(slots[10] == kBoundarySlot);
  CHECK(slots.back() == 20);

  CHECK_THROWS_AS(frame_slots({Side::Before, Side::After}), DataError);
  CHECK_THROWS_AS(frame_slots({Side::Boundary, Side::Boundary}), DataError);
  std::vector<Side> too_many(11, Side::Before);
  too_many.push_back(Side::Boundary);
  CHECK_THROWS_AS(frame_slots(too_many), DataError);
}

TEST_CASE("frame position embedding shifts CLS rows additively") {
  const EncoderConfig cfg = tiny_config();
  ParamStore<double> store;
  Rng rng(3);
  const auto enc = VisionEncoder<double>::build(store, cfg, rng);

  const auto frame = random_frame(cfg.resolution, 10);
  const auto mask = random_mask(cfg.resolution, cfg.c_seg, 11);

  // Same frame placed as before vs after: the CLS rows must differ exactly
  // by the difference of the two frame-position rows.
  Tape<double> t;
  const auto feats_b = enc.encode_record(
      t, {frame, random_frame(cfg.resolution, 12), random_frame(cfg.resolution, 13)},
      {mask, random_mask(cfg.resolution, cfg.c_seg, 14),
       random_mask(cfg.resolution, cfg.c_seg, 15)},
      {Side::Before, Side::Boundary, Side::After});
  const auto cls = t.val(feats_b.cls_all);
  REQUIRE(cls.rows() == 3);
  CHECK(feats_b.slots == std::vector<size_t>{9, 10, 11});

  // Re-encode the first frame standalone and compare against E_p additivity.
  const FrameOutput<double> raw = enc.encode_frame(t, frame);
  const auto& ep = enc.frame_pos->value;
  for (size_t j = 0; j < cfg.d; ++j) {
    CHECK(cls.at(0, j) ==
          doctest::Approx(t.val(raw.cls).data[j] + ep.at(9, j)).epsilon(1e-9));
  }
}

TEST_CASE("segmentation embedding is equivariant to patch permutation") {
  const EncoderConfig cfg = tiny_config();
  ParamStore<double> store;
  Rng rng(4);
  const auto enc = VisionEncoder<double>::build(store, cfg, rng);

  const auto mask = random_mask(cfg.resolution, cfg.c_seg, 20);
  // Swap the two top patches of the mask (patch grid is 2x2 at res 8/patch 4).
  Tensor<int64_t> swapped = mask;
  for (size_t y = 0; y < 4; ++y) {
    for (size_t x = 0; x < 4; ++x) {
      std::swap(swapped.data[y * 8 + x], swapped.data[y * 8 + 4 + x]);
    }
  }
  Tape<double> t;
  const auto a = t.val(enc.embed_segmentation(t, mask));
  const auto b = t.val(enc.embed_segmentation(t, swapped));
  REQUIRE(a.rows() == 4);
  for (size_t j = 0; j < cfg.d; ++j) {
    CHECK(a.at(0, j) == doctest::Approx(b.at(1, j)));
    CHECK(a.at(1, j) == doctest::Approx(b.at(0, j)));
    CHECK(a.at(2, j) == doctest::Approx(b.at(2, j)));
  }
}

TEST_CASE("encode_record validates its inputs") {
  const EncoderConfig cfg = tiny_config();
  ParamStore<double> store;
  Rng rng(5);
  const auto enc = VisionEncoder<double>::build(store, cfg, rng);
  Tape<double> t;
  CHECK_THROWS_AS(enc.encode_frame(t, random_frame(16, 1)), DataError);
  CHECK_THROWS_AS(
      enc.encode_record(t, {random_frame(8, 1)}, {}, {Side::Boundary}),
      DataError);
}

TEST_CASE("encoder gradients match finite differences") {
  const EncoderConfig cfg = tiny_config();
  ParamStore<double> store;
  Rng rng(6);
  const auto enc = VisionEncoder<double>::build(store, cfg, rng);

  const std::vector<Tensor<uint8_t>> frames = {random_frame(8, 30),
                                               random_frame(8, 31),
                                               random_frame(8, 32)};
  const std::vector<Tensor<int64_t>> masks = {random_mask(8, 4, 33),
                                              random_mask(8, 4, 34),
                                              random_mask(8, 4, 35)};
  const std::vector<Side> sides = {Side::Before, Side::Boundary, Side::After};

  auto eval = [&](bool backward) {
    Tape<double> t;
    const auto feats = enc.encode_record(t, frames, masks, sides);
    const int joined = t.concat_rows(
        {t.concat_rows(feats.patch_tokens), feats.cls_all});
    Tensor<double> u({1, t.val(joined).rows()});
    Tensor<double> v({cfg.d, 1});
    Rng r(99);
    for (auto& e : u.data) e = r.normal();
    for (auto& e : v.data) e = r.normal();
    const int loss =
        t.matmul(t.matmul(t.input(std::move(u)), joined), t.input(std::move(v)));
    const double value = t.val(loss).data[0];
    if (backward) {
      store.zero_grads();
      t.backward(loss);
    }
    return value;
  };

  eval(true);  // fills parameter gradients

  Rng pick(123);
  const double h = 1e-5;
  size_t checked = 0;
  for (const auto& p : store.items()) {
    // Two random coordinates per parameter tensor.
    for (int rep = 0; rep < 2; ++rep) {
      const size_t i = pick.below(p->value.numel());
      const double analytic = p->grad.data[i];
      const double orig = p->value.data[i];
      p->value.data[i] = orig + h;
      const double fp = eval(false);
      p->value.data[i] = orig - h;
      const double fm = eval(false);
      p->value.data[i] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double err =
          std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
      CHECK_MESSAGE(err < 1e-6, p->name, "[", i, "]: analytic=", analytic,
                    " fd=", fd);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

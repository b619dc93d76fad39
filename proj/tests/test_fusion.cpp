#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gebc/fusion.hpp"

using namespace gebc;

namespace {

Tensor<double> random_mat(size_t r, size_t c, uint64_t seed) {
  Rng rng(seed);
  Tensor<double> m({r, c});
  for (auto& v : m.data) v = rng.normal();
  return m;
}

std::vector<Side> make_sides(size_t n_bef, size_t n_aft) {
  std::vector<Side> sides(n_bef, Side::Before);
  sides.push_back(Side::Boundary);
  sides.insert(sides.end(), n_aft, Side::After);
  return sides;
}

Tensor<float> random_tsn(uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t({kTsnDim});
  for (auto& v : t.data) v = float(rng.normal());
  return t;
}

}  // namespace

TEST_CASE("pairwise-difference token count over the full grid") {
  for (size_t nb = 1; nb <= 10; ++nb) {
    for (size_t na = 1; na <= 10; ++na) {
      CHECK(tpd_pairs(make_sides(nb, na)).size() == tpd_count(nb, na));
      CHECK(tpd_count(nb, na) == nb * na + nb + na);
    }
  }
  CHECK(tpd_count(10, 10) == 120);
}

TEST_CASE("pair order: cross pairs before-major, then temporal anchors") {
  // indices: before = {0, 1}, boundary = 2, after = {3}
  const auto pairs = tpd_pairs(make_sides(2, 1));
  const std::vector<std::pair<size_t, size_t>> expect = {
      {0, 3}, {1, 3},  // before x after
      {0, 2}, {1, 2},  // before - boundary
      {2, 3},          // boundary - after
  };
  CHECK(pairs == expect);
}

TEST_CASE("degenerate side configurations are rejected") {
  CHECK_THROWS_AS(tpd_pairs({Side::Boundary, Side::After}), DataError);
  CHECK_THROWS_AS(tpd_pairs({Side::Before, Side::Boundary}), DataError);
  CHECK_THROWS_AS(tpd_pairs({Side::Before, Side::After}), DataError);
  CHECK_THROWS_AS(
      tpd_pairs({Side::Before, Side::Boundary, Side::Boundary, Side::After}),
      DataError);
}

TEST_CASE("difference rows are anti-symmetric and match direct subtraction") {
  const auto sides = make_sides(2, 2);
  Tape<double> t;
  const int cls = t.input(random_mat(5, 8, 1));
  const int tpd = compute_tpd(t, cls, sides);
  const auto& tv = t.val(tpd);
  const auto& cv = t.val(cls);
  const auto pairs = tpd_pairs(sides);
  REQUIRE(tv.rows() == pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    for (size_t j = 0; j < 8; ++j) {
      const double direct = cv.at(pairs[p].first, j) - cv.at(pairs[p].second, j);
      CHECK(tv.at(p, j) == doctest::Approx(direct));
      // anti-symmetry of the underlying difference
      const double reversed = cv.at(pairs[p].second, j) - cv.at(pairs[p].first, j);
      CHECK(tv.at(p, j) == doctest::Approx(-reversed));
    }
  }
}

TEST_CASE("average_cls is the arithmetic mean of CLS rows") {
  Tape<double> t;
  Tensor<double> cls({2, 3});
  cls.data = {1, 2, 3, 5, 6, 7};
  const int avg = average_cls(t, t.input(cls));
  CHECK(t.val(avg).data[0] == doctest::Approx(3.0));
  CHECK(t.val(avg).data[1] == doctest::Approx(4.0));
  CHECK(t.val(avg).data[2] == doctest::Approx(5.0));
}

TEST_CASE("attentional pooling is invariant to token permutation") {
  ParamStore<double> store;
  Rng rng(2);
  const auto pool = AttnPool<double>::build(store, "pool", 4, 8, 2, rng);

  const Tensor<double> tokens = random_mat(6, 8, 3);
  Tensor<double> permuted({6, 8});
  const size_t perm[] = {4, 0, 5, 2, 1, 3};
  for (size_t i = 0; i < 6; ++i) {
    for (size_t j = 0; j < 8; ++j) permuted.at(i, j) = tokens.at(perm[i], j);
  }
  Tape<double> t;
  const auto a = t.val(pool.forward(t, t.input(tokens)));
  const auto b = t.val(pool.forward(t, t.input(permuted)));
  REQUIRE(a.rows() == 4);
  for (size_t i = 0; i < a.data.size(); ++i) {
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("pooling a single token collapses every query to the same row") {
  ParamStore<double> store;
  Rng rng(4);
  const auto pool = AttnPool<double>::build(store, "pool", 4, 8, 2, rng);
  Tape<double> t;
  const auto out = t.val(pool.forward_prenorm(t, t.input(random_mat(1, 8, 5))));
  REQUIRE(out.rows() == 4);
  for (size_t i = 1; i < out.rows(); ++i) {
    for (size_t j = 0; j < out.cols(); ++j) {
      CHECK(out.at(i, j) == doctest::Approx(out.at(0, j)));
    }
  }
}

TEST_CASE("attention output stays in the convex hull of the value rows") {
  // Raw mha: each output row is a convex combination of v rows, per head.
  Tape<double> t;
  const int q = t.input(random_mat(5, 8, 6));
  const int k = t.input(random_mat(7, 8, 7));
  const int v = t.input(random_mat(7, 8, 8));
  const auto out = t.val(t.mha(q, k, v, 2, false));
  const auto& vv = t.val(v);
  const size_t dh = 4;
  for (size_t h = 0; h < 2; ++h) {
    for (size_t j = h * dh; j < (h + 1) * dh; ++j) {
      double lo = vv.at(0, j), hi = vv.at(0, j);
      for (size_t r = 1; r < 7; ++r) {
        lo = std::min(lo, vv.at(r, j));
        hi = std::max(hi, vv.at(r, j));
      }
      for (size_t r = 0; r < 5; ++r) {
        CHECK(out.at(r, j) >= lo - 1e-12);
        CHECK(out.at(r, j) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("TSN projection matches a hand-computed affine map") {
  ParamStore<double> store;
  Rng rng(9);
  const auto fusion = TemporalFusion<double>::build(store, FusionConfig{4, 2}, 8, rng);
  const auto before = random_tsn(10);
  const auto after = random_tsn(11);
  Tape<double> t;
  const auto out = t.val(fusion.project_tsn(t, before, after));
  REQUIRE(out.rows() == 2);
  const auto& W = fusion.tsn_proj.W->value;
  const auto& b = fusion.tsn_proj.b->value;
  for (size_t j = 0; j < 8; ++j) {
    double acc_b = 0, acc_a = 0;
    for (size_t p = 0; p < kTsnDim; ++p) {
      acc_b += double(before.data[p]) * W.at(j, p);
      acc_a += double(after.data[p]) * W.at(j, p);
    }
    CHECK(out.at(0, j) == doctest::Approx(acc_b + b.data[j]).epsilon(1e-9));
    CHECK(out.at(1, j) == doctest::Approx(acc_a + b.data[j]).epsilon(1e-9));
  }

  Tensor<float> short_tsn({16});
  CHECK_THROWS_AS(fusion.project_tsn(t, short_tsn, after), DataError);
}

TEST_CASE("fused context has 16 + 16 + 2 = 34 tokens with desk defaults") {
  ParamStore<double> store;
  Rng rng(12);
  const size_t d = 16;
  const auto fusion = TemporalFusion<double>::build(store, FusionConfig{}, d, rng);

  const auto sides = make_sides(2, 2);
  Tape<double> t;
  FrameFeaturesT<double> feats;
  for (size_t i = 0; i < sides.size(); ++i) {
    feats.patch_tokens.push_back(t.input(random_mat(4, d, 20 + i)));
  }
  feats.cls_all = t.input(random_mat(sides.size(), d, 30));
  const auto ctx = fusion.fuse(t, feats, sides, random_tsn(31), random_tsn(32));
  CHECK(t.val(ctx.tokens).rows() == 34);
  CHECK(t.val(ctx.tokens).cols() == d);
  CHECK(t.val(ctx.pooled_cls).rows() == 1);
  CHECK(t.val(ctx.pooled_cls).cols() == d);
}

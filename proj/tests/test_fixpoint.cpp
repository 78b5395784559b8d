// mrdp - map-reduce data plane model - fixed-point kernel tests
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "mrdp/fixpoint.hpp"

using namespace mrdp;

TEST_CASE("format constants") {
  CHECK(kFix8.max_raw() == 127);
  CHECK(kFix8.min_raw() == -128);
  CHECK(kFix8.ulp() == 0.0625);
  CHECK(kFix16.max_raw() == 32767);
  CHECK(kFix16.min_raw() == -32768);
  CHECK(kFix16.ulp() == Catch::Approx(1.0 / 256));
  CHECK(kFix32.max_raw() == 2147483647);
  CHECK(kFix32.min_raw() == -2147483648LL);
  CHECK(format_from_name("fix8") == kFix8);
  CHECK(format_name(kFix32) == "fix32");
}

TEST_CASE("quantize rounds to nearest even and saturates") {
  // Ties: half an ulp away from two representables, must pick the even raw.
  CHECK(fx_quantize(0.03125, kFix8) == 0);    // 0.5 raw -> 0
  CHECK(fx_quantize(0.09375, kFix8) == 2);    // 1.5 raw -> 2
  CHECK(fx_quantize(-0.03125, kFix8) == 0);   // -0.5 raw -> 0
  CHECK(fx_quantize(-0.09375, kFix8) == -2);  // -1.5 raw -> -2
  CHECK(fx_quantize(0.15625, kFix8) == 2);    // 2.5 raw -> 2
  // Saturation at both rails.
  CHECK(fx_quantize(100.0, kFix8) == 127);
  CHECK(fx_quantize(-100.0, kFix8) == -128);
  CHECK(fx_quantize(7.9375, kFix8) == 127);
  CHECK(fx_quantize(-8.0, kFix8) == -128);
  // NaN defined as zero.
  CHECK(fx_quantize(std::nan(""), kFix8) == 0);
  // Exhaustive round trip at fix8: every representable survives.
  for (int64_t r = kFix8.min_raw(); r <= kFix8.max_raw(); ++r) {
    CHECK(fx_quantize(fx_to_double(r, kFix8), kFix8) == r);
  }
}

TEST_CASE("add and mul match an independent double oracle exhaustively at fix8") {
  for (int64_t a = -128; a <= 127; ++a) {
    for (int64_t b = -128; b <= 127; ++b) {
      int64_t sum = fx_add(a, b, kFix8);
      int64_t sum_oracle = std::clamp<int64_t>(a + b, -128, 127);
      REQUIRE(sum == sum_oracle);

      // a,b scaled by 2^-4: the double product and its 2^4 scaling are both
      // exact, so nearbyint applies round-to-nearest-even to the true value.
      double exact = fx_to_double(a, kFix8) * fx_to_double(b, kFix8);
      double scaled = std::ldexp(exact, 4);
      int64_t mul_oracle = std::clamp<int64_t>(
          static_cast<int64_t>(std::nearbyint(scaled)), -128, 127);
      REQUIRE(fx_mul(a, b, kFix8) == mul_oracle);
    }
  }
}

TEST_CASE("mul tie cases hit the even neighbour") {
  // raw 8 * raw 1 = product 8 = exactly half an output ulp -> even (0).
  CHECK(fx_mul(8, 1, kFix8) == 0);
  // raw 24 * raw 1 = 24 -> between 1 and 2, tie -> 2.
  CHECK(fx_mul(24, 1, kFix8) == 2);
  CHECK(fx_mul(-8, 1, kFix8) == 0);
  CHECK(fx_mul(-24, 1, kFix8) == -2);
}

TEST_CASE("leaky relu negative branch divides by 8 with rne") {
  CHECK(fx_leaky_relu(16, kFix8) == 16);   // positive passthrough
  CHECK(fx_leaky_relu(0, kFix8) == 0);
  CHECK(fx_leaky_relu(-8, kFix8) == -1);   // -0.5 -> -0.0625
  CHECK(fx_leaky_relu(-4, kFix8) == 0);    // -0.25/8 = -0.5 raw, tie -> 0
  CHECK(fx_leaky_relu(-128, kFix8) == -16);
  CHECK(fx_relu(-77) == 0);
  CHECK(fx_relu(77) == 77);
}

TEST_CASE("reduce add is order independent and saturates once") {
  // Intermediate exceeds the rail, final result does not: a sequential
  // saturating chain would lose information, the wide accumulator must not.
  std::vector<int64_t> xs = {127, 127, 127, -127, -127, -127, 5};
  CHECK(fx_reduce_add(xs, kFix8) == 5);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int64_t> v(16);
    for (auto& x : v) x = static_cast<int64_t>(rng() % 256) - 128;
    int64_t ref = fx_reduce_add(v, kFix8);
    std::shuffle(v.begin(), v.end(), rng);
    REQUIRE(fx_reduce_add(v, kFix8) == ref);
  }
}

TEST_CASE("dot keeps full product precision until one final rounding") {
  // Per-element rounding would give 0 for every term here; the true sum of
  // products is 15/256 which rounds to raw 1.
  std::vector<int64_t> a = {5, 5, 5};
  std::vector<int64_t> b = {1, 1, 1};
  CHECK(fx_dot(a, b, kFix8) == 1);

  // Wide accumulation: terms overflow the rail pairwise but cancel overall.
  std::vector<int64_t> c = {127, 127, -127, -127, 16};
  std::vector<int64_t> d = {127, 127, 127, 127, 16};
  i128 acc = 0;
  for (size_t i = 0; i < c.size(); ++i) acc += i128(c[i]) * d[i];
  CHECK(fx_dot(c, d, kFix8) == fx_saturate(rne_shift(acc, 4), kFix8));

  // Order independence under shuffle, fix16.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int64_t> x(12), y(12);
    for (auto& v : x) v = static_cast<int64_t>(rng() % 65536) - 32768;
    for (auto& v : y) v = static_cast<int64_t>(rng() % 65536) - 32768;
    int64_t ref = fx_dot(x, y, kFix16);
    std::vector<size_t> perm(12);
    for (size_t i = 0; i < 12; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int64_t> xs(12), ys(12);
    for (size_t i = 0; i < 12; ++i) {
      xs[i] = x[perm[i]];
      ys[i] = y[perm[i]];
    }
    REQUIRE(fx_dot(xs, ys, kFix16) == ref);
  }
}

TEST_CASE("reduce max and min") {
  std::vector<int64_t> xs = {-5, 3, 127, -128, 0};
  CHECK(fx_reduce_max(xs, kFix8) == 127);
  CHECK(fx_reduce_min(xs, kFix8) == -128);
  CHECK(fx_reduce_max(std::vector<int64_t>{}, kFix8) == -128);
  CHECK(fx_reduce_min(std::vector<int64_t>{}, kFix8) == 127);
}

TEST_CASE("fix32 wide dot does not overflow the accumulator") {
  // 32 maximal products at fix32: each ~2^62, the sum needs >64 bits.
  std::vector<int64_t> a(32, kFix32.max_raw());
  std::vector<int64_t> b(32, kFix32.max_raw());
  CHECK(fx_dot(a, b, kFix32) == kFix32.max_raw());
  std::vector<int64_t> c(32, kFix32.min_raw());
  CHECK(fx_dot(a, c, kFix32) == kFix32.min_raw());
}

TEST_CASE("lut approximates sigmoid and tanh within the pinned bound at fix8") {
  LutSet luts = LutSet::standard(kFix8);
  // Bound: cell width * max |f'| + one output ulp. Cell width = 16/1024.
  const double cell = 16.0 / 1024.0;
  const double sig_bound = cell * 0.25 + kFix8.ulp();
  const double tanh_bound = cell * 1.0 + kFix8.ulp();
  for (int64_t r = kFix8.min_raw(); r <= kFix8.max_raw(); ++r) {
    double x = fx_to_double(r, kFix8);
    double sig = 1.0 / (1.0 + std::exp(-x));
    double tg = std::tanh(x);
    REQUIRE(std::abs(fx_to_double(luts.sigmoid.eval(r), kFix8) - sig) <= sig_bound);
    REQUIRE(std::abs(fx_to_double(luts.tanh_t.eval(r), kFix8) - tg) <= tanh_bound);
  }
}

TEST_CASE("lut entries and clamping behave") {
  LutSet luts = LutSet::standard(kFix16);
  // Sigmoid table is monotone non-decreasing.
  for (size_t k = 1; k < luts.sigmoid.entries.size(); ++k) {
    REQUIRE(luts.sigmoid.entries[k] >= luts.sigmoid.entries[k - 1]);
  }
  CHECK(luts.sigmoid.entries.size() == 1024);
  // Inputs beyond the domain clamp to the first / last cell.
  CHECK(luts.sigmoid.eval(kFix16.min_raw()) == luts.sigmoid.entries.front());
  CHECK(luts.sigmoid.eval(kFix16.max_raw()) == luts.sigmoid.entries.back());
  // exp domain is [-8, 0): exp(-8) ~ 0, exp(~0) ~ 1.
  CHECK(fx_to_double(luts.exp_t.eval(fx_quantize(-8.0, kFix16)), kFix16) ==
        Catch::Approx(0.0).margin(0.01));
  CHECK(fx_to_double(luts.exp_t.eval(0), kFix16) == Catch::Approx(1.0).margin(0.01));
  // recip: 1/0.5 = 2 within a cell.
  CHECK(fx_to_double(luts.recip.eval(fx_quantize(0.5, kFix16)), kFix16) ==
        Catch::Approx(2.0).margin(0.05));
}

TEST_CASE("comparisons and select") {
  CHECK(fx_cmp_lt(3, 5, kFix8) == 16);
  CHECK(fx_cmp_lt(5, 3, kFix8) == 0);
  CHECK(fx_cmp_ge(5, 5, kFix8) == 16);
  CHECK(fx_select(16, 7, 9) == 7);
  CHECK(fx_select(0, 7, 9) == 9);
}

// mrdp - map-reduce data plane model - fixed-point arithmetic kernels
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mrdp/common.hpp"

namespace mrdp {

// Signed two's complement fixed point. A value is carried as a plain int64
// raw integer plus a format; all kernels are free functions so the same code
// path serves the interpreter, the cycle-level executor, and the tests.
struct FixedFormat {
  int total_bits = 16;
  int frac_bits = 8;

  constexpr int64_t max_raw() const { return (int64_t(1) << (total_bits - 1)) - 1; }
  constexpr int64_t min_raw() const { return -(int64_t(1) << (total_bits - 1)); }
  double ulp() const { return std::ldexp(1.0, -frac_bits); }
  bool operator==(const FixedFormat&) const = default;
};

inline constexpr FixedFormat kFix8{8, 4};
inline constexpr FixedFormat kFix16{16, 8};
inline constexpr FixedFormat kFix32{32, 16};

inline FixedFormat format_from_name(const std::string& name) {
  if (name == "fix8") return kFix8;
  if (name == "fix16") return kFix16;
  if (name == "fix32") return kFix32;
  throw Error("unknown fixed-point format: " + name);
}

inline std::string format_name(FixedFormat f) {
  if (f == kFix8) return "fix8";
  if (f == kFix16) return "fix16";
  if (f == kFix32) return "fix32";
  return "fix" + std::to_string(f.total_bits) + "." + std::to_string(f.frac_bits);
}

using i128 = __int128;

inline int64_t fx_saturate(i128 v, FixedFormat f) {
  if (v > f.max_raw()) return f.max_raw();
  if (v < f.min_raw()) return f.min_raw();
  return static_cast<int64_t>(v);
}

// Arithmetic right shift with round-to-nearest, ties to even. Works for
// negative values because >> floors and the remainder is taken non-negative.
inline i128 rne_shift(i128 v, int shift) {
  if (shift <= 0) return v << (-shift);
  i128 q = v >> shift;
  i128 rem = v - (q << shift);
  i128 half = i128(1) << (shift - 1);
  if (rem > half) return q + 1;
  if (rem == half) return q + (q & 1);
  return q;
}

// double -> raw, round-to-nearest-even then saturate. NaN maps to zero.
inline int64_t fx_quantize(double x, FixedFormat f) {
  if (std::isnan(x)) return 0;
  double scaled = std::ldexp(x, f.frac_bits);
  if (scaled >= static_cast<double>(f.max_raw())) return f.max_raw();
  if (scaled <= static_cast<double>(f.min_raw())) return f.min_raw();
  // nearbyint honours the FE_TONEAREST default: ties to even.
  return static_cast<int64_t>(std::nearbyint(scaled));
}

inline double fx_to_double(int64_t raw, FixedFormat f) {
  return std::ldexp(static_cast<double>(raw), -f.frac_bits);
}

inline int64_t fx_add(int64_t a, int64_t b, FixedFormat f) { return fx_saturate(i128(a) + b, f); }
inline int64_t fx_sub(int64_t a, int64_t b, FixedFormat f) { return fx_saturate(i128(a) - b, f); }
inline int64_t fx_neg(int64_t a, FixedFormat f) { return fx_saturate(-i128(a), f); }

inline int64_t fx_mul(int64_t a, int64_t b, FixedFormat f) {
  return fx_saturate(rne_shift(i128(a) * b, f.frac_bits), f);
}

inline int64_t fx_max(int64_t a, int64_t b) { return a > b ? a : b; }
inline int64_t fx_min(int64_t a, int64_t b) { return a < b ? a : b; }
inline int64_t fx_relu(int64_t a) { return a > 0 ? a : 0; }

// Negative branch multiplies by 2^-shift (default slope 1/8) with the same
// round-to-nearest-even rule as every other narrowing step.
inline int64_t fx_leaky_relu(int64_t a, FixedFormat f, int shift = 3) {
  if (a >= 0) return a;
  return fx_saturate(rne_shift(i128(a), shift), f);
}

inline int64_t fx_select(int64_t cond, int64_t a, int64_t b) { return cond != 0 ? a : b; }

// Comparisons produce fixed-point 1.0 / 0.0 so they compose with select.
inline int64_t fx_cmp_lt(int64_t a, int64_t b, FixedFormat f) {
  return a < b ? (int64_t(1) << f.frac_bits) : 0;
}
inline int64_t fx_cmp_ge(int64_t a, int64_t b, FixedFormat f) {
  return a >= b ? (int64_t(1) << f.frac_bits) : 0;
}

// ==========================================================================
// widened reductions
//
// Sums accumulate in a 128-bit intermediate and saturate exactly once at the
// end, which makes the result independent of association order. Dot products
// additionally keep the full Q(2F) product precision until a single final
// rounding shift.
// ==========================================================================

inline int64_t fx_reduce_add(std::span<const int64_t> xs, FixedFormat f) {
  i128 acc = 0;
  for (int64_t x : xs) acc += x;
  return fx_saturate(acc, f);
}

inline int64_t fx_reduce_max(std::span<const int64_t> xs, FixedFormat f) {
  if (xs.empty()) return f.min_raw();
  int64_t m = xs[0];
  for (int64_t x : xs.subspan(1)) m = fx_max(m, x);
  return m;
}

inline int64_t fx_reduce_min(std::span<const int64_t> xs, FixedFormat f) {
  if (xs.empty()) return f.max_raw();
  int64_t m = xs[0];
  for (int64_t x : xs.subspan(1)) m = fx_min(m, x);
  return m;
}

inline int64_t fx_dot(std::span<const int64_t> a, std::span<const int64_t> b, FixedFormat f) {
  i128 acc = 0;
  size_t n = a.size() < b.size() ? a.size() : b.size();
  for (size_t i = 0; i < n; ++i) acc += i128(a[i]) * b[i];
  return fx_saturate(rne_shift(acc, f.frac_bits), f);
}

// Accumulator for additive reductions. Multiply-accumulate contributions keep
// the full Q(2F) product; plain values are promoted into the same scale. One
// rounding shift and one saturation happen at finish(). Every engine that
// evaluates a Reduce(+) goes through this type, which is what makes the
// interpreter and the cycle-level executor bit-exact against each other.
struct ReduceAccum {
  i128 acc = 0;

  void add_product(int64_t a, int64_t b) { acc += i128(a) * b; }
  void add_value(int64_t v, FixedFormat f) { acc += i128(v) << f.frac_bits; }
  int64_t finish(FixedFormat f) const { return fx_saturate(rne_shift(acc, f.frac_bits), f); }
};

// ==========================================================================
// lookup tables
//
// 1024-entry tables over [lo, hi). Entry k holds fn evaluated at the cell
// centre, quantized. Inputs clamp to the domain; the index is computed in
// integer raw space so evaluation is exact and platform independent.
// ==========================================================================

struct Lut {
  std::string name;
  FixedFormat fmt;
  double lo = -8.0;
  double hi = 8.0;
  int64_t lo_raw = 0;
  int64_t hi_raw = 0;
  std::vector<int64_t> entries;  // size 1024

  static constexpr int kEntries = 1024;

  static Lut build(const std::string& name, const std::function<double(double)>& fn,
                   FixedFormat fmt, double lo = -8.0, double hi = 8.0) {
    Lut t;
    t.name = name;
    t.fmt = fmt;
    t.lo = lo;
    t.hi = hi;
    t.lo_raw = fx_quantize(lo, fmt);
    t.hi_raw = fx_quantize(hi, fmt);
    double step = (hi - lo) / kEntries;
    t.entries.resize(kEntries);
    for (int k = 0; k < kEntries; ++k) {
      t.entries[k] = fx_quantize(fn(lo + (k + 0.5) * step), fmt);
    }
    return t;
  }

  int64_t eval(int64_t x_raw) const {
    int64_t x = x_raw;
    if (x < lo_raw) x = lo_raw;
    if (x >= hi_raw) x = hi_raw - 1;
    i128 idx = (i128(x - lo_raw) * kEntries) / (hi_raw - lo_raw);
    if (idx < 0) idx = 0;
    if (idx >= kEntries) idx = kEntries - 1;
    return entries[static_cast<size_t>(idx)];
  }
};

// The standard table set. exp is built over [-8, 0) because callers subtract
// the running max first (softmax style); recip over [0.125, 8).
struct LutSet {
  Lut sigmoid, tanh_t, exp_t, recip;

  static LutSet standard(FixedFormat fmt) {
    LutSet s;
    s.sigmoid = Lut::build("sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, fmt);
    s.tanh_t = Lut::build("tanh", [](double x) { return std::tanh(x); }, fmt);
    s.exp_t = Lut::build("exp", [](double x) { return std::exp(x); }, fmt, -8.0, 0.0);
    s.recip = Lut::build("recip", [](double x) { return 1.0 / x; }, fmt, 0.125, 8.0);
    return s;
  }

  const Lut& by_name(const std::string& n) const {
    if (n == "sigmoid") return sigmoid;
    if (n == "tanh") return tanh_t;
    if (n == "exp") return exp_t;
    if (n == "recip") return recip;
    throw Error("unknown lut: " + n);
  }
};

}  // namespace mrdp

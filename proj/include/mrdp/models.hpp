// mrdp - map-reduce data plane model - benchmark catalog and tensor synthesis
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrdp/compiler.hpp"
#include "mrdp/dsl.hpp"
#include "mrdp/fixpoint.hpp"

namespace mrdp {

// Published reference numbers a benchmark is expected to reproduce. Scoring
// bands: latency within +-25%, area within +-30%, power at most 1.3x the
// reference, rate exact, initiation interval inside [ii_lo, ii_hi]. A zero
// reference means the column is not scored for that benchmark.
struct PerfTarget {
  double rate_gpps = 0.0;
  double latency_ns = 0.0;
  double area_mm2 = 0.0;
  double power_mw = 0.0;
  int ii_lo = 1;
  int ii_hi = 1;
};

inline constexpr double kLatencyBand = 0.25;
inline constexpr double kAreaBand = 0.30;
inline constexpr double kPowerCeiling = 1.30;

struct BenchmarkSpec {
  std::string name;   // catalog key; also the program name in `source`
  std::string group;  // "app" (full pipelines) or "kernel" (single stages)
  std::string note;   // one line for report headers
  std::string source;
  CompileOptions options;
  PerfTarget target;
  // Calibration benchmarks pin latency and area exactly, not just in band.
  bool calibration = false;
};

// One row of a rate/area-versus-unroll sweep. Rates are exact fractions of
// the line rate; areas score with the usual band.
struct SweepPoint {
  int unroll = 1;
  double rate_gpps = 0.0;
  double area_mm2 = 0.0;
};

struct UnrollSweep {
  std::string bench;  // catalog key the sweep recompiles
  std::vector<SweepPoint> points;
};

namespace detail {

inline const char* kKmeansSrc = R"(program kmeans {
input x: fix8[11];
weights c0: fix8[11] = load("c0.csv");
weights c1: fix8[11] = load("c1.csv");
weights c2: fix8[11] = load("c2.csv");
weights c3: fix8[11] = load("c3.csv");
weights c4: fix8[11] = load("c4.csv");
output y: fix8[1];
d0 = Reduce(Map(11){ j => (x[j] - c0[j]) * (x[j] - c0[j]) }){ (a, b) => a + b };
d1 = Reduce(Map(11){ j => (x[j] - c1[j]) * (x[j] - c1[j]) }){ (a, b) => a + b };
d2 = Reduce(Map(11){ j => (x[j] - c2[j]) * (x[j] - c2[j]) }){ (a, b) => a + b };
d3 = Reduce(Map(11){ j => (x[j] - c3[j]) * (x[j] - c3[j]) }){ (a, b) => a + b };
d4 = Reduce(Map(11){ j => (x[j] - c4[j]) * (x[j] - c4[j]) }){ (a, b) => a + b };
m01 = min(d0, d1);
i01 = select(d1 < d0, 0.0625, 0.0);
m23 = min(d2, d3);
i23 = select(d3 < d2, 0.1875, 0.125);
m03 = min(m01, m23);
i03 = select(m23 < m01, i23, i01);
y = select(d4 < m03, 0.25, i03);
}
)";

// RBF kernel in factored form: K(x, s) = exp(u0 + nxx) * exp(u1) where
// u0 + u1 = sum_j 2g*s_j*x_j - g*|s|^2 + ln|a_s| and nxx = -g*|x|^2. The
// generator pre-scales the weights (see synth_tensors), the sign of each
// coefficient rides in sgn, and the shared exp(-g*|x|^2) factor is computed
// once per packet as a one-element stream.
inline const char* kSvmRbfSrc = R"(program svm_rbf {
input x: fix8[8];
weights g: fix8[8,16] = load("g.csv");
weights q: fix8[16] = load("q.csv");
weights sgn: fix8[16] = load("sgn.csv");
weights b: fix8[1] = load("b.csv");
output y: fix8[1];
t0 = Map(16){ s => g[0,s] * x[0] + g[1,s] * x[1] + q[s] };
t2 = Map(16){ s => g[4,s] * x[4] + g[5,s] * x[5] };
t1 = Map(16){ s => g[2,s] * x[2] + g[3,s] * x[3] };
u0 = Map(16){ s => t1[s] + t0[s] };
t3 = Map(16){ s => g[6,s] * x[6] + g[7,s] * x[7] };
u1 = Map(16){ s => t3[s] + t2[s] };
xx = Reduce(Map(8){ j => x[j] * x[j] }){ (a, b) => a + b };
nxx = 0.0 - 0.0625 * xx;
ex = Map(1){ k => exp(nxx) };
e0 = Map(16){ s => exp(u0[s]) };
e1 = Map(16){ s => exp(u1[s]) };
y = Reduce(Map(16){ s => (e0[s] * e1[s]) * (sgn[s] * ex[0]) }){ (a, b) => a + b } + b[0];
}
)";

inline const char* kDnnSrc = R"(program dnn {
input x: fix8[6];
weights w1: fix8[12,6] = load("w1.csv");
weights b1: fix8[12] = load("b1.csv");
weights w2: fix8[6,12] = load("w2.csv");
weights b2: fix8[6] = load("b2.csv");
weights w3: fix8[3,6] = load("w3.csv");
weights b3: fix8[3] = load("b3.csv");
weights w4: fix8[2,3] = load("w4.csv");
weights b4: fix8[2] = load("b4.csv");
output y: fix8[2];
h1 = Map(12){ n => relu(Reduce(Map(6){ j => w1[n,j] * x[j] }){ (a, b) => a + b } + b1[n]) };
h2 = Map(6){ n => relu(Reduce(Map(12){ j => w2[n,j] * h1[j] }){ (a, b) => a + b } + b2[n]) };
h3 = Map(3){ n => relu(Reduce(Map(6){ j => w3[n,j] * h2[j] }){ (a, b) => a + b } + b3[n]) };
z = Map(2){ n => Reduce(Map(3){ j => w4[n,j] * h3[j] }){ (a, b) => a + b } + b4[n] };
y = Map(2){ n => sigmoid(z[n]) };
}
)";

// LSTM anomaly detector, one step per packet: two scalar packet features,
// hidden state 32, four-way softmax over traffic classes. The input-affine
// part of all four gates is precomputed as one width-128 chain; each gate
// then adds its 32x32 recurrent matvec slice.
inline const char* kIndigoSrc = R"(program indigo {
input x: fix8[2];
input h: fix8[32];
input c: fix8[32];
weights wx: fix8[128,2] = load("wx.csv");
weights bx: fix8[128] = load("bx.csv");
weights uf: fix8[32,32] = load("uf.csv");
weights ui: fix8[32,32] = load("ui.csv");
weights ug: fix8[32,32] = load("ug.csv");
weights uo: fix8[32,32] = load("uo.csv");
weights v: fix8[4,32] = load("v.csv");
output p: fix8[4];
output hp: fix8[32];
output cp: fix8[32];
xq = Map(128){ n => wx[n,0] * x[0] + wx[n,1] * x[1] + bx[n] };
zf = Map(32){ u => Reduce(Map(32){ k => uf[u,k] * h[k] }){ (a, b) => a + b } + xq[u] };
zi = Map(32){ u => Reduce(Map(32){ k => ui[u,k] * h[k] }){ (a, b) => a + b } + xq[32 + u] };
zg = Map(32){ u => Reduce(Map(32){ k => ug[u,k] * h[k] }){ (a, b) => a + b } + xq[64 + u] };
zo = Map(32){ u => Reduce(Map(32){ k => uo[u,k] * h[k] }){ (a, b) => a + b } + xq[96 + u] };
f = Map(32){ u => sigmoid(zf[u]) };
i = Map(32){ u => sigmoid(zi[u]) };
g = Map(32){ u => tanh(zg[u]) };
o = Map(32){ u => sigmoid(zo[u]) };
cp = Map(32){ u => f[u] * c[u] + i[u] * g[u] };
t = Map(32){ u => tanh(cp[u]) };
hp = Map(32){ u => o[u] * t[u] };
l = Map(4){ a => Reduce(Map(32){ k => v[a,k] * hp[k] }){ (a, b) => a + b } };
m = Reduce(Map(4){ a => l[a] }){ (a, b) => max(a, b) };
d = Map(4){ a => l[a] - m };
e = Map(4){ a => exp(d[a]) };
s = Reduce(Map(4){ a => e[a] }){ (a, b) => a + b };
r = recip(s);
p = Map(4){ a => e[a] * r };
}
)";

inline const char* kConv1dSrc = R"(program conv1d {
input x: fix8[10];
weights k: fix8[3] = load("k.csv");
output y: fix8[8];
y = Map(8){ i => Reduce(Map(3){ j => k[j] * x[i + j] }){ (a, b) => a + b } };
}
)";

inline const char* kPerceptSrc = R"(program percept {
input x: fix8[16];
weights w: fix8[16] = load("w.csv");
output y: fix8[1];
y = Reduce(Map(16){ i => w[i] * x[i] }){ (a, b) => a + b };
}
)";

inline const char* kSvmLinSrc = R"(program svm_lin {
input x: fix8[32];
weights w: fix8[32] = load("w.csv");
output y: fix8[1];
y = Reduce(Map(32){ j => w[j] * x[j] }){ (a, b) => a + b };
}
)";

inline const char* kLstmLinSrc = R"(program lstm_lin {
input xh: fix8[32];
weights w: fix8[32] = load("w.csv");
weights b: fix8[1] = load("b.csv");
output y: fix8[1];
y = Reduce(Map(32){ j => w[j] * xh[j] }){ (a, b) => a + b } + b[0];
}
)";

inline const char* kGruLinSrc = R"(program gru_lin {
input hx: fix8[32];
weights w: fix8[32] = load("w.csv");
weights b: fix8[1] = load("b.csv");
output y: fix8[1];
y = Reduce(Map(32){ j => w[j] * hx[j] }){ (a, b) => a + b } + b[0];
}
)";

inline const char* kLeakyReluSrc = R"(program leaky_relu {
input x: fix8[16] scalars;
weights s: fix8[1] = load("s.csv");
output y: fix8[16];
y = Map(16){ i => max(x[i], s[0] * x[i]) };
}
)";

inline const char* kReluSrc = R"(program relu {
input x: fix8[16] scalars;
output y: fix8[16];
y = Map(16){ i => relu(x[i]) };
}
)";

inline const char* kSigmoidLutSrc = R"(program sigmoid_lut {
input x: fix8[16] scalars;
output y: fix8[16];
y = Map(16){ i => sigmoid(x[i]) };
}
)";

inline const char* kTanhLutSrc = R"(program tanh_lut {
input x: fix8[16] scalars;
output y: fix8[16];
y = Map(16){ i => tanh(x[i]) };
}
)";

inline CompileOptions spatial_options() { return CompileOptions{}; }

inline CompileOptions unrolled_options(int u) {
  CompileOptions o;
  o.default_unroll = u;
  return o;
}

inline CompileOptions indigo_options() {
  CompileOptions o;
  o.default_unroll = 1;
  for (const char* gate : {"zf", "zi", "zg", "zo"}) {
    o.unroll[gate] = 5;
    o.unroll[std::string(gate) + ".comb"] = 3;
  }
  return o;
}

}  // namespace detail

inline const std::vector<BenchmarkSpec>& benchmark_catalog() {
  static const std::vector<BenchmarkSpec> specs = [] {
    using namespace detail;
    std::vector<BenchmarkSpec> v;
    v.push_back({"kmeans", "app",
                 "nearest-centroid traffic classifier, 5 centroids over 11 features",
                 kKmeansSrc, spatial_options(), {1.00, 76.0, 2.48, 142.0, 1, 1}});
    v.push_back({"svm_rbf", "app",
                 "RBF-kernel SVM, 16 support vectors over 8 features",
                 kSvmRbfSrc, spatial_options(), {1.00, 68.0, 4.59, 263.0, 1, 1}});
    v.push_back({"dnn", "app",
                 "4-layer MLP 6-12-6-3-2 with sigmoid head",
                 kDnnSrc, unrolled_options(16), {1.00, 188.0, 8.80, 506.0, 1, 1}});
    v.push_back({"indigo", "app",
                 "LSTM anomaly detector, hidden 32, 4-way softmax",
                 kIndigoSrc, indigo_options(), {0.08, 380.0, 17.73, 1018.0, 12, 13}});
    v.push_back({"conv1d", "kernel",
                 "width-3 convolution over a 10-element window, 8 outputs",
                 kConv1dSrc, unrolled_options(8), {1.00, 47.0, 4.93, 0.0, 1, 1}});
    BenchmarkSpec percept{"percept", "kernel",
                          "16-wide perceptron dot product",
                          kPerceptSrc, spatial_options(),
                          {1.00, 16.0, 0.78, 0.0, 1, 1}};
    percept.calibration = true;
    v.push_back(percept);
    v.push_back({"svm_lin", "kernel",
                 "linear SVM margin, 32-wide dot product",
                 kSvmLinSrc, unrolled_options(2), {1.00, 30.0, 1.82, 0.0, 1, 1}});
    v.push_back({"lstm_lin", "kernel",
                 "LSTM gate linear slice over the concatenated [x; h] vector",
                 kLstmLinSrc, spatial_options(), {1.00, 29.0, 2.34, 0.0, 1, 1}});
    v.push_back({"gru_lin", "kernel",
                 "GRU update-gate linear slice over the concatenated [h; x] vector",
                 kGruLinSrc, spatial_options(), {1.00, 29.0, 2.34, 0.0, 1, 1}});
    v.push_back({"leaky_relu", "kernel",
                 "leaky ReLU over 16 scalar streams, learned slope",
                 kLeakyReluSrc, spatial_options(), {1.00, 21.0, 0.78, 0.0, 1, 1}});
    v.push_back({"relu", "kernel",
                 "ReLU over 16 scalar streams",
                 kReluSrc, spatial_options(), {1.00, 20.0, 0.52, 0.0, 1, 1}});
    v.push_back({"sigmoid_lut", "kernel",
                 "sigmoid lookup over 16 scalar streams",
                 kSigmoidLutSrc, spatial_options(), {1.00, 27.0, 0.52, 0.0, 1, 1}});
    v.push_back({"tanh_lut", "kernel",
                 "tanh lookup over 16 scalar streams",
                 kTanhLutSrc, spatial_options(), {1.00, 27.0, 0.52, 0.0, 1, 1}});
    return v;
  }();
  return specs;
}

inline const BenchmarkSpec& benchmark(const std::string& name) {
  for (const auto& b : benchmark_catalog())
    if (b.name == name) return b;
  throw Error("unknown benchmark '" + name + "'");
}

// Rate/area scaling with the unroll degree. conv1d at unroll 1 is the area
// calibration point (one CU sharing one MU with the window buffer).
inline const std::vector<UnrollSweep>& unroll_sweeps() {
  static const std::vector<UnrollSweep> sweeps = {
      {"conv1d",
       {{1, 0.125, 0.78}, {2, 0.25, 1.30}, {4, 0.5, 2.34}, {8, 1.0, 4.93}}},
      {"svm_lin", {{1, 0.5, 1.30}, {2, 1.0, 1.82}}},
  };
  return sweeps;
}

inline CompileOptions sweep_options(const BenchmarkSpec& spec, int unroll) {
  CompileOptions o = spec.options;
  o.default_unroll = unroll;
  return o;
}

// ---- deterministic tensor synthesis ----

// Seed-stable generator used for synthetic weights and packet inputs. The
// stdlib distributions are not bit-stable across implementations, so the
// mixer is spelled out; the constants are the usual splitmix64 ones.
class SeedStream {
 public:
  explicit SeedStream(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [lo, hi), 53-bit resolution.
  double uniform(double lo, double hi) {
    double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  uint64_t state_;
};

namespace detail {

// Per-tensor sub-seed so adding a declaration never shifts its neighbours.
inline uint64_t tensor_seed(uint64_t seed, const std::string& name) {
  uint64_t h = 1469598103934665603ull ^ seed;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::vector<int64_t> uniform_tensor(FixedFormat fmt, int64_t n,
                                           uint64_t seed, double lo, double hi) {
  SeedStream rng(seed);
  std::vector<int64_t> out(static_cast<size_t>(n));
  for (auto& x : out) x = fx_quantize(rng.uniform(lo, hi), fmt);
  return out;
}

// svm_rbf weights are derived jointly from raw support vectors: for gamma
// g = 1/16, support vector s and coefficient a, the stored rows are
//   g[j,s] = 2*g*s_j,  q[s] = -g*|s|^2 + ln|a|,  sgn[s] = sign(a),
// so that exp(u0 + nxx) * exp(u1) * sgn = a * exp(-g*|x - s|^2).
inline void synth_svm_rbf(const Program& p, uint64_t seed,
                          std::map<std::string, std::vector<int64_t>>& out) {
  const double gamma = 0.0625;
  const int features = 8, svs = 16;
  FixedFormat fmt = p.format();
  SeedStream rng(tensor_seed(seed, "svm_rbf.model"));
  std::vector<int64_t> g(features * svs), q(svs), sgn(svs);
  for (int s = 0; s < svs; ++s) {
    double norm2 = 0.0;
    for (int j = 0; j < features; ++j) {
      double sj = rng.uniform(-1.0, 1.0);
      norm2 += sj * sj;
      g[j * svs + s] = fx_quantize(2.0 * gamma * sj, fmt);
    }
    double alpha = rng.uniform(0.5, 2.0);
    q[s] = fx_quantize(-gamma * norm2 + std::log(alpha), fmt);
    sgn[s] = fx_quantize(rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0, fmt);
  }
  out["g"] = std::move(g);
  out["q"] = std::move(q);
  out["sgn"] = std::move(sgn);
  out["b"] = {fx_quantize(rng.uniform(-0.25, 0.25), fmt)};
}

}  // namespace detail

// Synthesizes every input and weights tensor of `p` from one seed. Most
// tensors draw uniformly from [-1, 1]; recurrent matrices draw from a
// narrower band so pre-activations stay inside the lookup domains, and
// svm_rbf weights come from the structured generator above.
inline std::map<std::string, std::vector<int64_t>> synth_tensors(const Program& p,
                                                                 uint64_t seed) {
  std::map<std::string, std::vector<int64_t>> out;
  FixedFormat fmt = p.format();
  bool structured_svm = p.name == "svm_rbf";
  if (structured_svm) detail::synth_svm_rbf(p, seed, out);
  for (const auto& d : p.decls) {
    if (d.kind == TensorKind::Output) continue;
    if (out.count(d.name)) continue;
    double span = 1.0;
    if (p.name == "indigo" && d.kind == TensorKind::Weights) span = 0.5;
    if (p.name == "indigo" && (d.name == "h" || d.name == "c")) span = 0.5;
    out[d.name] = detail::uniform_tensor(fmt, d.words(),
                                         detail::tensor_seed(seed, d.name),
                                         -span, span);
  }
  return out;
}

}  // namespace mrdp

// mrdp - map-reduce data plane model - compiler and executor tests
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "mrdp/compiler.hpp"
#include "mrdp/execute.hpp"
#include "mrdp/interp.hpp"
#include "mrdp/parser.hpp"
#include "mrdp/validate.hpp"

using namespace mrdp;

namespace {

Program parsed(const std::string& src) {
  Program p = parse_program(src);
  validate(p);
  return p;
}

Module compiled(const std::string& src, int unroll = 0,
                std::map<std::string, int> overrides = {}) {
  Program p = parsed(src);
  CompileOptions opts;
  opts.default_unroll = unroll;
  opts.unroll = std::move(overrides);
  return compile(p, opts);
}

std::vector<int64_t> random_raw(SplitMix64& rng, int n, const FixedFormat& f) {
  std::vector<int64_t> v(n);
  for (auto& x : v)
    x = f.min_raw() + static_cast<int64_t>(rng.next_below(
                          static_cast<uint64_t>(f.max_raw() - f.min_raw() + 1)));
  return v;
}

// Runs interpreter and executor on the same tensors and requires bit equality.
void require_bit_exact(const std::string& src, uint64_t seed, int rounds = 8,
                       int unroll = 0) {
  Program p = parsed(src);
  LutSet luts = LutSet::standard(p.format());
  CompileOptions opts;
  opts.default_unroll = unroll;
  Module m = compile(p, opts);
  SplitMix64 rng(seed);
  for (int r = 0; r < rounds; ++r) {
    std::map<std::string, std::vector<int64_t>> tensors;
    for (const auto& d : p.decls) {
      if (d.kind == TensorKind::Output) continue;
      tensors[d.name] = random_raw(rng, static_cast<int>(d.words()), p.format());
    }
    Interpreter interp(p, luts);
    for (const auto& [k, v] : tensors) interp.set_tensor(k, v);
    auto want = interp.run();
    auto got = execute(m, tensors, luts);
    REQUIRE(want.size() == got.size());
    for (const auto& [name, w] : want) {
      INFO("output " << name << " round " << r);
      REQUIRE(got.at(name) == w);
    }
  }
}

const char* kPercept = R"(
program percept {
input x: fix8[16];
weights w: fix8[16] = load("w.csv");
output y: fix8[1];
y = Reduce(Map(16){ i => w[i] * x[i] }){ (a, b) => a + b };
}
)";

const char* kReluMicro = R"(
program relu_micro {
input x: fix8[16] scalars;
output y: fix8[16];
y = Map(16){ i => relu(x[i]) };
}
)";

const char* kLeakyMicro = R"(
program leaky_micro {
input x: fix8[16] scalars;
weights s: fix8[1] = load("s.csv");
output y: fix8[16];
y = Map(16){ i => max(x[i], s[0] * x[i]) };
}
)";

const char* kSigmoidMicro = R"(
program sigmoid_micro {
input x: fix8[16] scalars;
output y: fix8[16];
y = Map(16){ i => sigmoid(x[i]) };
}
)";

const char* kSvmLin = R"(
program svm_lin {
input x: fix8[32];
weights w: fix8[32] = load("w.csv");
output y: fix8[1];
y = Reduce(Map(32){ j => w[j] * x[j] }){ (a, b) => a + b };
}
)";

const char* kLstmLin = R"(
program lstm_lin {
input x: fix8[16];
input h: fix8[16];
weights wx: fix8[16] = load("wx.csv");
weights uh: fix8[16] = load("uh.csv");
weights b: fix8[1] = load("b.csv");
output y: fix8[1];
y = Reduce(Map(16){ i => wx[i] * x[i] }){ (a, b) => a + b }
  + Reduce(Map(16){ i => uh[i] * h[i] }){ (a, b) => a + b } + b[0];
}
)";

const char* kConv1d = R"(
program conv1d {
input x: fix8[10];
weights k: fix8[3] = load("k.csv");
output y: fix8[8];
y = Map(8){ i => Reduce(Map(3){ j => k[j] * x[i + j] }){ (a, b) => a + b } };
}
)";

const char* kKmeans = R"(
program kmeans {
input x: fix8[16] scalars;
weights c: fix8[4,16] = load("c.csv");
output y: fix8[1];
d = Map(4){ i => Reduce(Map(16){ j => (x[j] - c[i,j]) * (x[j] - c[i,j]) }){ (a, b) => a + b } };
m01 = min(d[0], d[1]);
m23 = min(d[2], d[3]);
m = min(m01, m23);
e0 = m >= d[0];
e1 = m >= d[1];
e2 = m >= d[2];
y = select(e0, 0.0, select(e1, 0.0625, select(e2, 0.125, 0.1875)));
}
)";

const char* kRbfSlice = R"(
program rbf_slice {
input x: fix8[12];
weights sv: fix8[5,12] = load("sv.csv");
weights g2: fix8[5] = load("g2.csv");
weights alpha: fix8[5] = load("alpha.csv");
output y: fix8[1];
xx = Reduce(Map(12){ j => x[j] * x[j] }){ (a, b) => a + b };
nxx = 0.0 - 0.125 * xx;
k = Map(5){ s => Reduce(Map(12){ j => sv[s,j] * x[j] }){ (a, b) => a + b } + g2[s] + nxx };
e = Map(5){ s => exp(k[s]) };
y = Reduce(Map(5){ s => alpha[s] * e[s] }){ (a, b) => a + b };
}
)";

const char* kGates = R"(
program gates {
input x: fix8[20];
input h: fix8[12];
weights wf: fix8[12,20] = load("wf.csv");
weights uf: fix8[12,12] = load("uf.csv");
weights bf: fix8[12] = load("bf.csv");
output f: fix8[12];
zf = Map(12){ u => Reduce(Map(20){ j => wf[u,j] * x[j] }){ (a, b) => a + b }
            + Reduce(Map(12){ j => uf[u,j] * h[j] }){ (a, b) => a + b } + bf[u] };
f = Map(12){ u => sigmoid(zf[u]) };
}
)";

int count_kind(const Module& m, NodeKind k) {
  int n = 0;
  for (const auto& nd : m.nodes)
    if (nd.kind == k) ++n;
  return n;
}

}  // namespace

TEST_CASE("percept maps to the calibration point") {
  Module m = compiled(kPercept);
  REQUIRE(m.perf.cus == 1);
  REQUIRE(m.perf.mus == 1);
  REQUIRE(m.perf.links == 3);
  REQUIRE(m.perf.ii == 1);
  REQUIRE(m.perf.area_mm2 == Catch::Approx(0.78).margin(1e-9));
  REQUIRE(m.perf.latency_ns == Catch::Approx(16.0).margin(1e-9));

  const ProtoNode* mr = nullptr;
  for (const auto& n : m.nodes)
    if (n.kind == NodeKind::MapReduce) mr = &n;
  REQUIRE(mr != nullptr);
  REQUIRE(mr->mac);
  REQUIRE(mr->reduce_width == 16);
  REQUIRE(mr->lane_ops.size() == 1);
  REQUIRE_FALSE(mr->emits_partials);
}

TEST_CASE("activation micros hit the pinned latencies") {
  Module relu = compiled(kReluMicro);
  REQUIRE(relu.perf.latency_ns == Catch::Approx(20.0).margin(1e-9));
  REQUIRE(relu.perf.cus == 1);
  REQUIRE(relu.perf.links == 2);

  Module leaky = compiled(kLeakyMicro);
  REQUIRE(leaky.perf.latency_ns == Catch::Approx(21.0).margin(1e-9));
  REQUIRE(leaky.perf.cus == 1);
  REQUIRE(leaky.perf.mus == 1);

  Module sig = compiled(kSigmoidMicro);
  REQUIRE(sig.perf.latency_ns == Catch::Approx(24.0).margin(1e-9));
  REQUIRE(count_kind(sig, NodeKind::Lut) == 1);
}

TEST_CASE("chunked dot splits into partials and a combiner") {
  Module m = compiled(kSvmLin, 2);
  REQUIRE(count_kind(m, NodeKind::MapReduce) == 1);
  REQUIRE(count_kind(m, NodeKind::Combine) == 1);
  REQUIRE(m.perf.cus == 3);  // two dot instances + combiner
  REQUIRE(m.perf.ii == 1);
  REQUIRE(m.perf.rate_gpps == Catch::Approx(1.0));
  REQUIRE(m.perf.latency_ns == Catch::Approx(30.0).margin(1e-9));

  Module u1 = compiled(kSvmLin, 1);
  REQUIRE(u1.perf.ii == 2);
  REQUIRE(u1.perf.rate_gpps == Catch::Approx(0.5));
  REQUIRE(u1.perf.cus == 2);
}

TEST_CASE("gate sum folds the second dot and bias into tails") {
  Module m = compiled(kLstmLin);
  REQUIRE(m.perf.cus == 2);
  REQUIRE(m.perf.mus == 2);
  REQUIRE(m.perf.links == 6);
  REQUIRE(m.perf.area_mm2 == Catch::Approx(1.56).margin(1e-6));
  REQUIRE(m.perf.latency_ns == Catch::Approx(28.5).margin(1e-9));

  int tails = 0;
  for (const auto& n : m.nodes)
    if (n.kind == NodeKind::MapReduce) tails += static_cast<int>(n.tails.size());
  REQUIRE(tails == 2);
}

TEST_CASE("sliding window stages through a private buffer") {
  Module u1 = compiled(kConv1d, 1);
  REQUIRE(count_kind(u1, NodeKind::BufferMu) == 1);
  REQUIRE(u1.perf.mus == 1);  // kernel co-resident with the window buffer
  REQUIRE(u1.perf.area_mm2 == Catch::Approx(0.78).margin(1e-9));
  REQUIRE(u1.perf.ii == 8);

  Module u8 = compiled(kConv1d, 8);
  REQUIRE(u8.perf.ii == 1);
  REQUIRE(u8.perf.cus == 8);
  REQUIRE(u8.perf.mus == 10);  // 8 window buffers + 2 kernel units
}

TEST_CASE("scalar statements coalesce into one block") {
  Module m = compiled(kKmeans);
  REQUIRE(count_kind(m, NodeKind::ScalarBlock) == 1);
  for (const auto& n : m.nodes) {
    if (n.kind == NodeKind::ScalarBlock) REQUIRE(n.ops.size() == 9);
    if (n.kind == NodeKind::MapReduce) {
      REQUIRE(n.mac);
      REQUIRE(n.lane_ops.size() == 2);  // subtract + square rows
    }
  }
  REQUIRE(m.perf.cus == 5);
  REQUIRE(m.perf.mus == 2);
  REQUIRE(m.perf.links == 8);
  REQUIRE(m.perf.ii == 1);
}

TEST_CASE("cross statement chains fold into reduce tails") {
  Module m = compiled(kRbfSlice);
  // xx picks up the scale/negate chain; k rows carry bias and shared tails.
  int blocks = count_kind(m, NodeKind::ScalarBlock);
  REQUIRE(blocks == 0);
  REQUIRE(m.perf.cus == 1 + 5 + 1 + 1);
  REQUIRE(count_kind(m, NodeKind::Lut) == 1);
  REQUIRE(m.perf.ii == 1);
}

TEST_CASE("combiner merging keeps gate pairs on one accumulator") {
  Module m = compiled(kGates, 0, {{"zf", 1}, {"zf.comb", 1}});
  // wf dot is chunked (20 wide): combine absorbs the unchunked uh dot and
  // the bias as tails.
  REQUIRE(count_kind(m, NodeKind::Combine) == 1);
  for (const auto& n : m.nodes) {
    if (n.kind == NodeKind::Combine) {
      REQUIRE(n.n_partial_edges == 1);
      REQUIRE(n.tails.size() == 2);
    }
  }
  REQUIRE(count_kind(m, NodeKind::MapReduce) == 2);
  REQUIRE(count_kind(m, NodeKind::Lut) == 1);
}

TEST_CASE("executor matches the interpreter bit for bit") {
  require_bit_exact(kPercept, 0x11);
  require_bit_exact(kSvmLin, 0x22);
  require_bit_exact(kSvmLin, 0x23, 8, 1);  // partial unroll is timing-only
  require_bit_exact(kLstmLin, 0x33);
  require_bit_exact(kConv1d, 0x44);
  require_bit_exact(kConv1d, 0x45, 8, 4);
  require_bit_exact(kKmeans, 0x55);
  require_bit_exact(kRbfSlice, 0x66);
  require_bit_exact(kGates, 0x77);
  require_bit_exact(kReluMicro, 0x88);
  require_bit_exact(kLeakyMicro, 0x99);
  require_bit_exact(kSigmoidMicro, 0xaa);
}

TEST_CASE("mapping and report serialize") {
  Module m = compiled(kPercept);
  std::string map_text = mapping_to_text(m);
  REQUIRE(map_text.find("#mrdp-mapping v1") == 0);
  REQUIRE(map_text.find("map_reduce") != std::string::npos);
  std::string rep = m.perf.to_kv();
  REQUIRE(rep.find("#mrdp-report v1") == 0);
  REQUIRE(rep.find("area_mm2 = 0.780000") != std::string::npos);
}

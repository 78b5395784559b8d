// mrdp - map-reduce data plane model - DSL frontend tests
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "mrdp/interp.hpp"
#include "mrdp/parser.hpp"
#include "mrdp/validate.hpp"

using namespace mrdp;

namespace {

const char* kDotProgram = R"(
// 16-wide perceptron body: one fused map-reduce.
program percept {
  input x: fix8[16];
  weights w: fix8[16] = load("w.csv");
  output y: fix8[1];

  y = Reduce(Map(16) { i => w[i] * x[i] }) { (a, b) => a + b };
}
)";

Program parsed(const char* src) {
  Program p = parse_program(src);
  validate(p);
  return p;
}

}  // namespace

TEST_CASE("parse a fused map reduce program") {
  Program p = parsed(kDotProgram);
  CHECK(p.name == "percept");
  REQUIRE(p.decls.size() == 3);
  CHECK(p.decls[0].kind == TensorKind::Input);
  CHECK(p.decls[1].kind == TensorKind::Weights);
  CHECK(p.decls[1].load_path == "w.csv");
  CHECK(p.decls[2].kind == TensorKind::Output);
  REQUIRE(p.stmts.size() == 1);
  const Expr& e = *p.stmts[0].value;
  REQUIRE(e.kind == ExprKind::ReduceExpr);
  CHECK(e.reduce_op == ReduceOp::Add);
  REQUIRE(e.source->kind == ExprKind::MapExpr);
  CHECK(e.source->map_count == 16);
}

TEST_CASE("printer output reparses to the same tree") {
  const char* sources[] = {
      kDotProgram,
      R"(program p { input x: fix8[4] scalars; output y: fix8[1];
           y = Reduce(Map(4) { i => relu(x[i] - 0.5) }) { (a, b) => max(a, b) }; })",
      R"(program p { input x: fix16[8]; weights w: fix16[2, 8] = load("w.csv");
           output y: fix16[2];
           t = Map(2) { i => Reduce(Map(8) { j => w[i, j] * x[j] }) { (a, b) => a + b } };
           y = Map(2) { i => sigmoid(t[i]) }; })",
      R"(program p { input x: fix8[3]; output y: fix8[1];
           c = select(x[0] < x[1], 0.0, 1.0);
           m = min(x[0], x[1]);
           y = select(m < x[2], c, 2.0); })",
  };
  for (const char* src : sources) {
    Program p1 = parsed(src);
    std::string printed = to_source(p1);
    Program p2 = parse_program(printed);
    validate(p2);
    CHECK(to_source(p2) == printed);
  }
}

TEST_CASE("validator rejects malformed programs") {
  auto bad = [](const char* src) {
    Program p = parse_program(src);
    REQUIRE_THROWS_AS(validate(p), ValidateError);
  };
  // No output.
  bad("program p { input x: fix8[4]; y = Reduce(x) { (a,b) => a + b }; }");
  // Unknown name.
  bad("program p { input x: fix8[4]; output y: fix8[1]; y = z; }");
  // Mixed precision.
  bad("program p { input x: fix8[4]; output y: fix16[1]; y = x[0]; }");
  // Assigning an input.
  bad("program p { input x: fix8[4]; output y: fix8[1]; x = 1.0; y = x[0]; }");
  // Double assignment.
  bad("program p { input x: fix8[4]; output y: fix8[1]; t = x[0]; t = x[1]; y = t; }");
  // Index out of range.
  bad("program p { input x: fix8[4]; output y: fix8[1]; y = x[4]; }");
  // Out of range through an affine index at the loop corner.
  bad(R"(program p { input x: fix8[4]; output y: fix8[4];
         y = Map(4) { i => x[i + 1] }; })");
  // Non-affine index.
  bad(R"(program p { input x: fix8[9]; output y: fix8[3];
         y = Map(3) { i => x[i * i] }; })");
  // Bad combiner.
  bad(R"(program p { input x: fix8[4]; output y: fix8[1];
         y = Reduce(x) { (a, b) => a - b }; })");
  // Vector operand to a scalar operator.
  bad("program p { input x: fix8[4]; output y: fix8[1]; y = Reduce(x + x) { (a,b) => a + b }; }");
  // Output length mismatch.
  bad("program p { input x: fix8[4]; output y: fix8[2]; y = x[0]; }");
  // Nesting depth over 4.
  bad(R"(program p { input x: fix8[2]; output y: fix8[1];
         y = Reduce(Map(2) { i =>
               Reduce(Map(2) { j =>
                 Reduce(Map(2) { k => x[0] }) { (a, b) => a + b }
               }) { (c, d) => c + d }
             }) { (e, f) => e + f }; })");
  // Weights over memory unit capacity.
  bad(R"(program p { input x: fix8[4]; weights w: fix8[80, 80] = load("w.csv");
         output y: fix8[1]; y = Reduce(Map(4) { i => w[0, i] * x[i] }) { (a,b) => a + b }; })");
  // Matrix weights used without subscripts.
  bad(R"(program p { input x: fix8[4]; weights w: fix8[2, 4] = load("w.csv");
         output y: fix8[1]; y = Reduce(w) { (a,b) => a + b }; })");
  // Loop variable used as a value.
  bad(R"(program p { input x: fix8[4]; output y: fix8[4];
         y = Map(4) { i => x[i] + i }; })");
  // 2D output.
  bad("program p { input x: fix8[4]; output y: fix8[2,2]; y = x[0]; }");
}

TEST_CASE("parse errors carry a position") {
  try {
    parse_program("program p {\n  input x fix8[4];\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("expected :") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_program("program p { input x: fix8[4]; output y: fix8[1]; y = x[0] }"),
                  ParseError);
  CHECK_THROWS_AS(parse_program("program p { @ }"), ParseError);
  CHECK_THROWS_AS(parse_program(""), ParseError);
}

TEST_CASE("interpreter computes a dot product with full precision accumulation") {
  Program p = parsed(kDotProgram);
  LutSet luts = LutSet::standard(kFix8);
  Interpreter in(p, luts);

  // w = x = all 0.3125 (raw 5): 16 products of 25/256 -> 400/256 raw = 25 raw.
  in.set_tensor("w", std::vector<int64_t>(16, 5));
  in.set_tensor("x", std::vector<int64_t>(16, 5));
  auto out = in.run();
  REQUIRE(out.count("y"));
  REQUIRE(out["y"].size() == 1);
  CHECK(out["y"][0] == 25);
}

TEST_CASE("interpreter handles nested map reduce, activations and selects") {
  const char* src = R"(
    program net {
      input x: fix8[4];
      weights w: fix8[2, 4] = load("w.csv");
      weights b: fix8[2] = load("b.csv");
      output y: fix8[2];

      h = Map(2) { i => relu(Reduce(Map(4) { j => w[i, j] * x[j] }) { (a, c) => a + c } + b[i]) };
      y = Map(2) { i => select(h[i] < 1.0, h[i], 1.0) };
    }
  )";
  Program p = parsed(src);
  LutSet luts = LutSet::standard(kFix8);
  Interpreter in(p, luts);
  // x = [1, 2, 3, 4] (raw 16,32,48,64), w row0 = [1,1,1,1], row1 = [-1,0,0,0],
  // b = [0.5, 0.25].
  in.set_tensor("x", {16, 32, 48, 64});
  in.set_tensor("w", {16, 16, 16, 16, -16, 0, 0, 0});
  in.set_tensor("b", {8, 4});
  auto out = in.run();
  // h[0] = relu(10 + 0.5) = 7.9375 saturated at the reduce+add... the dot is
  // 10.0 = raw 160 > 127 so it saturates to 127 (7.9375); +0.5 saturates again.
  // select(7.9375 < 1.0, ...) -> 1.0 (raw 16).
  CHECK(out["y"][0] == 16);
  // h[1] = relu(-1 + 0.25) = 0; select(0 < 1) -> h[1] = 0.
  CHECK(out["y"][1] == 0);
}

TEST_CASE("interpreter reduce over a plain vector uses promoted values") {
  const char* src = R"(
    program s {
      input x: fix8[3];
      output y: fix8[1];
      t = Map(3) { i => x[i] * x[i] };
      y = Reduce(t) { (a, b) => a + b };
    }
  )";
  Program p = parsed(src);
  LutSet luts = LutSet::standard(kFix8);
  Interpreter in(p, luts);
  // x raw = [5, 5, 5]: t rounds each square (25/256 -> raw 2), sum = 6.
  // A full-precision dot would give 75/256 -> raw 5; the explicit intermediate
  // pins the rounded-per-element behaviour.
  in.set_tensor("x", {5, 5, 5});
  auto out = in.run();
  CHECK(out["y"][0] == 6);
}

TEST_CASE("interpreter runs max reduce and lut calls") {
  const char* src = R"(
    program m {
      input x: fix16[4];
      output y: fix16[1];
      mx = Reduce(x) { (a, b) => max(a, b) };
      y = sigmoid(mx);
    }
  )";
  Program p = parsed(src);
  LutSet luts = LutSet::standard(kFix16);
  Interpreter in(p, luts);
  in.set_tensor("x", {fx_quantize(-1.0, kFix16), fx_quantize(0.5, kFix16),
                      fx_quantize(2.0, kFix16), fx_quantize(-3.0, kFix16)});
  auto out = in.run();
  double got = fx_to_double(out["y"][0], kFix16);
  CHECK(got == Catch::Approx(1.0 / (1.0 + std::exp(-2.0))).margin(0.02));
}

TEST_CASE("csv tensor io round trips") {
  std::vector<int64_t> t = {16, -8, 127, -128, 0, 3};
  std::string csv = tensor_to_csv(t, kFix8, 3);
  CHECK(tensor_from_csv(csv, kFix8) == t);
  CHECK(tensor_from_csv("# comment\n\n1.0, 2.0\n", kFix8) ==
        std::vector<int64_t>{16, 32});
  CHECK_THROWS_AS(tensor_from_csv("1.0, zap\n", kFix8), IoError);
}

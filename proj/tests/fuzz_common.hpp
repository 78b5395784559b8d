// mrdp - map-reduce data plane model - shared randomized program generator
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mrdp/compiler.hpp"
#include "mrdp/execute.hpp"
#include "mrdp/interp.hpp"
#include "mrdp/models.hpp"
#include "mrdp/parser.hpp"
#include "mrdp/validate.hpp"

// Random programs over the supported construct envelope, used to check the
// fabric executor against the reference interpreter bit for bit. Covers
// eltwise chains (packing, select, luts), fused and chunked reduces with
// tails, matvecs, scalar blocks, cross-statement chaining and multi-output
// programs, under several unroll policies.
namespace fuzz {

struct Val {
  std::string name;
  int width = 1;
  bool scalar = false;       // scalar shape: VarRef-able, not indexable
  bool scalar_read = false;  // consumed via scalar VarRef by a later stmt
};

class ProgramGen {
 public:
  explicit ProgramGen(uint64_t seed) : rng_(seed) {}

  std::string generate(int idx, mrdp::CompileOptions& opts) {
    const int unrolls[] = {0, 0, 1, 2, 16};
    opts = mrdp::CompileOptions{};
    opts.default_unroll = unrolls[pick(5)];

    const int widths[] = {3, 5, 8, 11, 16, 24, 32};
    int w0 = widths[pick(7)];
    int w1 = widths[pick(7)];
    add_input("in0", w0);
    add_input("in1", w0);
    add_input("in2", w1);

    int stmts = 4 + pick(4);
    for (int s = 0; s < stmts; ++s) {
      switch (pick(20)) {
        case 0: case 1: case 2: case 3: case 4: case 5: case 6:
          emit_eltwise();
          break;
        case 7: case 8: case 9: case 10: case 11:
          emit_dot();
          break;
        case 12: case 13: case 14:
          emit_matvec();
          break;
        case 15: case 16: case 17:
          if (!emit_scalar()) emit_eltwise();
          break;
        default:
          if (!emit_conv()) emit_dot();
          break;
      }
    }

    // Outputs: the final statement plus up to two earlier values that are
    // never consumed as scalars (declared outputs read back as tensors).
    std::vector<size_t> outs{vals_.size() - 1};
    for (int k = 0; k < 2; ++k) {
      size_t i = pick(static_cast<int>(vals_.size()));
      if (vals_[i].scalar_read) continue;
      bool dup = false;
      for (size_t o : outs) dup |= o == i;
      if (!dup) outs.push_back(i);
    }

    std::ostringstream os;
    os << "program fuzz" << idx << " {\n";
    for (const auto& d : input_decls_) os << d << ";\n";
    for (const auto& d : weight_decls_) os << d << ";\n";
    for (size_t i : outs)
      os << "output " << vals_[i].name << ": fix8[" << vals_[i].width << "];\n";
    os << stmts_.str() << "}\n";
    return os.str();
  }

 private:
  mrdp::SeedStream rng_;
  std::ostringstream stmts_;
  std::vector<std::string> input_decls_, weight_decls_;
  std::vector<Val> vals_;
  std::vector<std::pair<std::string, int>> inputs_;  // name, width
  int next_w_ = 0, next_t_ = 0;

  int pick(int n) { return static_cast<int>(rng_.next() % n); }
  bool chance(double p) { return rng_.uniform(0.0, 1.0) < p; }

  void add_input(const std::string& name, int w) {
    input_decls_.push_back("input " + name + ": fix8[" + std::to_string(w) + "]");
    inputs_.emplace_back(name, w);
  }

  std::string fresh_weights(int w) {
    std::string n = "w" + std::to_string(next_w_++);
    weight_decls_.push_back("weights " + n + ": fix8[" + std::to_string(w) +
                            "] = load(\"" + n + ".csv\")");
    return n;
  }

  std::string fresh_matrix(int r, int c) {
    std::string n = "w" + std::to_string(next_w_++);
    weight_decls_.push_back("weights " + n + ": fix8[" + std::to_string(r) + "," +
                            std::to_string(c) + "] = load(\"" + n + ".csv\")");
    return n;
  }

  std::string fresh_target() { return "t" + std::to_string(next_t_++); }

  std::string literal() {
    const char* lits[] = {"0.25", "-0.5", "1.0", "0.0625", "-1.5", "2.0"};
    return lits[pick(6)];
  }

  // Streams of width w readable with [i]: inputs and vector locals.
  std::vector<std::string> streams_of(int w) {
    std::vector<std::string> r;
    for (const auto& [n, iw] : inputs_)
      if (iw == w) r.push_back(n);
    for (const auto& v : vals_)
      if (!v.scalar && v.width == w) r.push_back(v.name);
    return r;
  }

  const Val* some_vector() {
    std::vector<const Val*> r;
    for (const auto& v : vals_)
      if (!v.scalar && v.width > 1) r.push_back(&v);
    if (r.empty()) return nullptr;
    return r[pick(static_cast<int>(r.size()))];
  }

  int reduce_width() {
    // Prefer an existing stream width so lanes have operands; widths over
    // 16 exercise chunked reduces with partial combiners.
    const Val* v = some_vector();
    if (v && chance(0.7)) return v->width;
    return inputs_[pick(static_cast<int>(inputs_.size()))].second;
  }

  Val* some_scalar() {
    std::vector<Val*> r;
    for (auto& v : vals_)
      if (v.scalar) r.push_back(&v);
    if (r.empty()) return nullptr;
    return r[pick(static_cast<int>(r.size()))];
  }

  std::string some_vec1_tap() {
    std::vector<std::string> r;
    for (const auto& v : vals_)
      if (!v.scalar && v.width == 1) r.push_back(v.name + "[0]");
    if (r.empty()) return "";
    return r[pick(static_cast<int>(r.size()))];
  }

  // Scalar operand usable anywhere: literal, 1-wide weight, 1-wide stream
  // tap, or a scalar local (marked, since outputs cannot be scalar-read).
  std::string scalar_operand() {
    int k = pick(8);
    if (k < 2) return literal();
    if (k < 4) return fresh_weights(1) + "[0]";
    if (k < 6) {
      std::string t = some_vec1_tap();
      if (!t.empty()) return t;
    }
    if (Val* s = some_scalar()) {
      s->scalar_read = true;
      return s->name;
    }
    return literal();
  }

  std::string map_leaf(int w) {
    int k = pick(10);
    if (k < 5) {
      auto vs = streams_of(w);
      if (!vs.empty()) return vs[pick(static_cast<int>(vs.size()))] + "[i]";
    }
    if (k < 8) return fresh_weights(w) + "[i]";
    if (k == 8) return scalar_operand();
    return literal();
  }

  std::string map_expr(int w, int depth) {
    if (depth == 0 || chance(0.3)) return map_leaf(w);
    switch (pick(9)) {
      case 0:
        return "(" + map_expr(w, depth - 1) + " + " + map_expr(w, depth - 1) + ")";
      case 1:
        return "(" + map_expr(w, depth - 1) + " - " + map_expr(w, depth - 1) + ")";
      case 2:
        return "(" + map_expr(w, depth - 1) + " * " + map_expr(w, depth - 1) + ")";
      case 3:
        return "min(" + map_expr(w, depth - 1) + ", " + map_expr(w, depth - 1) + ")";
      case 4:
        return "max(" + map_expr(w, depth - 1) + ", " + map_expr(w, depth - 1) + ")";
      case 5:
        return "relu(" + map_expr(w, depth - 1) + ")";
      case 6:
        return "leaky_relu(" + map_expr(w, depth - 1) + ")";
      case 7: {
        const char* luts[] = {"sigmoid", "tanh", "exp"};
        return std::string(luts[pick(3)]) + "(" + map_expr(w, depth - 1) + ")";
      }
      default:
        return "select(" + map_expr(w, 0) + " < " + map_expr(w, 0) + ", " +
               map_expr(w, depth - 1) + ", " + map_expr(w, depth - 1) + ")";
    }
  }

  void emit_eltwise() {
    int w;
    if (const Val* v = some_vector(); v && chance(0.6)) {
      w = v->width;
    } else {
      w = inputs_[pick(static_cast<int>(inputs_.size()))].second;
    }
    std::string t = fresh_target();
    stmts_ << t << " = Map(" << w << "){ i => " << map_expr(w, 1 + pick(2))
           << " };\n";
    vals_.push_back({t, w, false, false});
  }

  void emit_dot() {
    int r = reduce_width();
    auto vs = streams_of(r);
    std::string v = vs.empty() ? fresh_weights(r) : vs[pick(static_cast<int>(vs.size()))];
    // With no stream of this width the reduce would be all-weights; give it
    // a stream by falling back to an input width.
    if (vs.empty()) {
      r = inputs_[0].second;
      v = inputs_[0].first;
    }
    std::string lane;
    switch (pick(5)) {
      case 0: lane = fresh_weights(r) + "[j] * " + v + "[j]"; break;
      case 1: lane = v + "[j] * " + v + "[j]"; break;
      case 2: {
        std::string w = fresh_weights(r);
        lane = "(" + v + "[j] - " + w + "[j]) * (" + v + "[j] - " + w + "[j])";
        break;
      }
      case 3: {
        std::string tap = some_vec1_tap();
        if (tap.empty()) tap = fresh_weights(1) + "[0]";
        lane = "(" + fresh_weights(r) + "[j] * " + v + "[j]) * " + tap;
        break;
      }
      default: lane = v + "[j]"; break;
    }
    const char* rop = "a + b";
    bool minmax = lane == v + "[j]" || chance(0.15);
    if (minmax) rop = chance(0.5) ? "max(a, b)" : "min(a, b)";
    std::string core = "Reduce(Map(" + std::to_string(r) + "){ j => " + lane +
                       " }){ (a, b) => " + std::string(rop) + " }";
    std::string t = fresh_target();
    if (!minmax && chance(0.5)) {
      std::string biased = core + " + " + fresh_weights(1) + "[0]";
      if (chance(0.4)) biased = "relu(" + biased + ")";
      stmts_ << t << " = " << biased << ";\n";
    } else {
      stmts_ << t << " = " << core << ";\n";
    }
    vals_.push_back({t, 1, true, false});
  }

  void emit_matvec() {
    const Val* src = some_vector();
    int r = src ? src->width : inputs_[0].second;
    std::string v = src ? src->name : inputs_[0].first;
    const int outw[] = {2, 3, 4, 6, 8};
    int w = outw[pick(5)];
    std::string m = fresh_matrix(w, r);
    std::string core = "Reduce(Map(" + std::to_string(r) + "){ j => " + m +
                       "[n,j] * " + v + "[j] }){ (a, b) => a + b }";
    switch (pick(4)) {
      case 0: break;
      case 1: core = core + " + " + fresh_weights(w) + "[n]"; break;
      case 2: core = "relu(" + core + " + " + fresh_weights(w) + "[n])"; break;
      default: core = "sigmoid(" + core + ")"; break;
    }
    std::string t = fresh_target();
    stmts_ << t << " = Map(" << w << "){ n => " << core << " };\n";
    vals_.push_back({t, w, false, false});
  }

  bool emit_scalar() {
    if (!some_scalar() && some_vec1_tap().empty()) return false;
    std::string a = scalar_operand(), b = scalar_operand();
    std::string t = fresh_target();
    bool vec1 = false;
    switch (pick(6)) {
      case 0: stmts_ << t << " = min(" << a << ", " << b << ");\n"; break;
      case 1: stmts_ << t << " = max(" << a << ", " << b << ");\n"; break;
      case 2:
        stmts_ << t << " = select(" << a << " < " << b << ", " << scalar_operand()
               << ", " << scalar_operand() << ");\n";
        break;
      case 3: stmts_ << t << " = " << a << " + " << literal() << " * " << b << ";\n"; break;
      case 4: stmts_ << t << " = relu(" << a << " - " << b << ");\n"; break;
      default: {
        const char* luts[] = {"exp", "sigmoid", "tanh"};
        stmts_ << t << " = Map(1){ k => " << luts[pick(3)] << "(" << a << ") };\n";
        vec1 = true;
        break;
      }
    }
    vals_.push_back({t, 1, !vec1, false});
    return true;
  }

  bool emit_conv() {
    std::vector<std::pair<std::string, int>> wide;
    for (const auto& [n, w] : inputs_)
      if (w >= 5) wide.emplace_back(n, w);
    if (wide.empty()) return false;
    auto [x, w] = wide[pick(static_cast<int>(wide.size()))];
    int outw = w - 2;
    std::string k = fresh_weights(3);
    std::string t = fresh_target();
    stmts_ << t << " = Map(" << outw << "){ i => Reduce(Map(3){ j => " << k
           << "[j] * " << x << "[i + j] }){ (a, b) => a + b } };\n";
    vals_.push_back({t, outw, false, false});
    return true;
  }
};

// Equivalence does not depend on the grid size, so spatially large programs
// retry on a grown fabric instead of being skipped.
inline mrdp::Module compile_with_growth(const mrdp::Program& p, mrdp::CompileOptions opts) {
  for (int attempt = 0;; ++attempt) {
    try {
      return mrdp::compile(p, opts);
    } catch (const mrdp::CompileError& e) {
      std::string what = e.what();
      if (attempt == 2 || what.find("fabric too small") == std::string::npos) throw;
      opts.fabric.rows *= 2;
      opts.fabric.cols *= 2;
    }
  }
}

struct EquivalenceRun {
  long programs = 0;
  long outputs_checked = 0;
  long mismatches = 0;
  std::string first_failure;  // program source + output name, empty if clean
};

// Runs `programs` seeded random programs, `trials` input draws each, and
// compares every declared output word for word.
inline EquivalenceRun run_equivalence(int programs, int trials) {
  EquivalenceRun r;
  for (int i = 0; i < programs; ++i) {
    ProgramGen gen(0xF00D0000ull + static_cast<uint64_t>(i));
    mrdp::CompileOptions opts;
    std::string src = gen.generate(i, opts);
    mrdp::Program p = mrdp::parse_program(src);
    mrdp::validate(p);
    mrdp::Module m = compile_with_growth(p, opts);
    mrdp::LutSet luts = mrdp::LutSet::standard(m.fmt);
    ++r.programs;
    for (int trial = 0; trial < trials; ++trial) {
      auto tensors = mrdp::synth_tensors(p, 0xACE0ull + trial);
      mrdp::Interpreter ip(p, luts);
      for (const auto& [k, v] : tensors) ip.set_tensor(k, v);
      auto want = ip.run();
      auto got = mrdp::execute(m, tensors, luts);
      for (const auto& [name, w] : want) {
        ++r.outputs_checked;
        if (got.at(name) != w) {
          ++r.mismatches;
          if (r.first_failure.empty())
            r.first_failure = "program " + std::to_string(i) + " output " + name +
                              " trial " + std::to_string(trial) + "\n" + src;
        }
      }
    }
  }
  return r;
}

}  // namespace fuzz

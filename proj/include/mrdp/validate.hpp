// mrdp - map-reduce data plane model - program validation
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mrdp/dsl.hpp"

namespace mrdp {

struct ValidateOptions {
  int64_t mu_capacity = 4096;  // per-tensor on-fabric storage bound, in words
  int max_depth = 4;           // Map/Reduce nesting bound
};

// Expression value shape: scalar or rank-1 vector.
struct Shape {
  bool is_scalar = true;
  int len = 1;

  bool operator==(const Shape&) const = default;
  static Shape scalar() { return {true, 1}; }
  static Shape vector(int n) { return {false, n}; }
};

namespace detail {

struct BuiltinInfo {
  int arity;
};

inline const std::map<std::string, BuiltinInfo>& builtins() {
  static const std::map<std::string, BuiltinInfo> table = {
      {"relu", {1}},   {"leaky_relu", {1}}, {"sigmoid", {1}}, {"tanh", {1}},
      {"exp", {1}},    {"recip", {1}},      {"min", {2}},     {"max", {2}},
      {"select", {3}},
  };
  return table;
}

class Validator {
 public:
  Validator(Program& p, const ValidateOptions& opt) : prog_(p), opt_(opt) {}

  void run() {
    check_decls();
    for (auto& s : prog_.stmts) check_statement(s);
    check_outputs_assigned();
  }

 private:
  Program& prog_;
  const ValidateOptions& opt_;
  std::map<std::string, Shape> defined_;           // intermediates and assigned outputs
  std::set<std::string> assigned_outputs_;
  std::vector<std::pair<std::string, int>> loops_;  // loop var -> trip count

  [[noreturn]] void fail(const std::string& msg, int line = 0) const {
    if (line > 0) throw ValidateError(msg + " (line " + std::to_string(line) + ")");
    throw ValidateError(msg);
  }

  void check_decls() {
    std::set<std::string> names;
    int inputs = 0, outputs = 0;
    for (const auto& d : prog_.decls) {
      if (!names.insert(d.name).second) fail("duplicate declaration '" + d.name + "'");
      if (d.type_name != prog_.decls.front().type_name) {
        fail("all tensors must share one precision; '" + d.name + "' is " + d.type_name);
      }
      format_from_name(d.type_name);  // throws on unknown type
      if (d.dims.empty() || d.dims.size() > 2) {
        fail("tensor '" + d.name + "' must have rank 1 or 2");
      }
      for (int dim : d.dims) {
        if (dim < 1) fail("tensor '" + d.name + "' has a non-positive dimension");
      }
      switch (d.kind) {
        case TensorKind::Input:
          ++inputs;
          if (d.dims.size() != 1) fail("input '" + d.name + "' must be rank 1");
          break;
        case TensorKind::Output:
          ++outputs;
          if (d.dims.size() != 1) fail("output '" + d.name + "' must be rank 1");
          if (d.scalars) fail("'scalars' only applies to inputs");
          break;
        case TensorKind::Weights:
          if (d.scalars) fail("'scalars' only applies to inputs");
          if (d.load_path.empty()) fail("weights '" + d.name + "' needs load(...)");
          if (d.words() > opt_.mu_capacity) {
            fail("weights '" + d.name + "' (" + std::to_string(d.words()) +
                 " words) exceeds memory unit capacity " +
                 std::to_string(opt_.mu_capacity));
          }
          break;
      }
    }
    if (inputs == 0) fail("program needs at least one input");
    if (outputs == 0) fail("program needs at least one output");
    if (prog_.stmts.empty()) fail("program has no statements");
  }

  void check_statement(Statement& s) {
    const TensorDecl* d = prog_.find_decl(s.target);
    if (d) {
      if (d->kind != TensorKind::Output) {
        fail("cannot assign to " + std::string(d->kind == TensorKind::Input ? "input" : "weights") +
                 " '" + s.target + "'",
             s.line);
      }
      if (assigned_outputs_.count(s.target)) {
        fail("output '" + s.target + "' assigned twice", s.line);
      }
    } else if (defined_.count(s.target)) {
      fail("'" + s.target + "' assigned twice", s.line);
    }

    Shape sh = check_expr(*s.value, 0);

    if (d) {
      int want = d->dims[0];
      bool ok = sh.is_scalar ? (want == 1) : (sh.len == want);
      if (!ok) {
        fail("output '" + s.target + "' expects length " + std::to_string(want), s.line);
      }
      assigned_outputs_.insert(s.target);
      defined_[s.target] = Shape::vector(want);
    } else {
      defined_[s.target] = sh;
    }
  }

  void check_outputs_assigned() const {
    for (const auto& d : prog_.decls) {
      if (d.kind == TensorKind::Output && !assigned_outputs_.count(d.name)) {
        fail("output '" + d.name + "' is never assigned");
      }
    }
  }

  int loop_index(const std::string& name) const {
    for (size_t i = 0; i < loops_.size(); ++i) {
      if (loops_[i].first == name) return static_cast<int>(i);
    }
    return -1;
  }

  Shape check_expr(Expr& e, int depth) {
    switch (e.kind) {
      case ExprKind::Number:
        return Shape::scalar();

      case ExprKind::VarRef: {
        if (loop_index(e.name) >= 0) {
          fail("loop variable '" + e.name + "' can only appear inside an index", e.line);
        }
        if (const TensorDecl* d = prog_.find_decl(e.name)) {
          if (d->kind == TensorKind::Weights && d->dims.size() == 2) {
            fail("matrix weights '" + e.name + "' must be indexed", e.line);
          }
          if (d->kind == TensorKind::Output && !assigned_outputs_.count(e.name)) {
            fail("output '" + e.name + "' read before assignment", e.line);
          }
          return Shape::vector(d->dims[0]);
        }
        auto it = defined_.find(e.name);
        if (it == defined_.end()) fail("unknown name '" + e.name + "'", e.line);
        return it->second;
      }

      case ExprKind::Index: {
        Shape base;
        std::vector<int> dims;
        if (const TensorDecl* d = prog_.find_decl(e.name)) {
          if (d->kind == TensorKind::Output && !assigned_outputs_.count(e.name)) {
            fail("output '" + e.name + "' read before assignment", e.line);
          }
          dims = d->dims;
        } else {
          auto it = defined_.find(e.name);
          if (it == defined_.end()) fail("unknown name '" + e.name + "'", e.line);
          if (it->second.is_scalar) fail("cannot index scalar '" + e.name + "'", e.line);
          dims = {it->second.len};
        }
        if (e.args.size() != dims.size()) {
          fail("'" + e.name + "' has rank " + std::to_string(dims.size()) + ", indexed with " +
                   std::to_string(e.args.size()) + " subscripts",
               e.line);
        }
        for (size_t i = 0; i < e.args.size(); ++i) {
          check_index_expr(*e.args[i], dims[i]);
        }
        return Shape::scalar();
      }

      case ExprKind::Binary: {
        Shape l = check_expr(*e.args[0], depth);
        Shape r = check_expr(*e.args[1], depth);
        if (!l.is_scalar || !r.is_scalar) {
          fail("operator '" + std::string(1, e.op) +
                   "' needs scalar operands; use Map for elementwise work",
               e.line);
        }
        return Shape::scalar();
      }

      case ExprKind::Call: {
        auto it = builtins().find(e.name);
        if (it == builtins().end()) fail("unknown builtin '" + e.name + "'", e.line);
        if (static_cast<int>(e.args.size()) != it->second.arity) {
          fail("'" + e.name + "' takes " + std::to_string(it->second.arity) + " arguments",
               e.line);
        }
        for (auto& a : e.args) {
          Shape s = check_expr(*a, depth);
          if (!s.is_scalar) fail("'" + e.name + "' needs scalar arguments", e.line);
        }
        return Shape::scalar();
      }

      case ExprKind::MapExpr: {
        if (depth + 1 > opt_.max_depth) {
          fail("Map/Reduce nesting exceeds depth " + std::to_string(opt_.max_depth), e.line);
        }
        if (e.map_count < 1) fail("Map count must be positive", e.line);
        if (loop_index(e.var1) >= 0 || prog_.find_decl(e.var1) || defined_.count(e.var1)) {
          fail("loop variable '" + e.var1 + "' shadows an existing name", e.line);
        }
        loops_.emplace_back(e.var1, e.map_count);
        Shape body = check_expr(*e.body, depth + 1);
        loops_.pop_back();
        if (!body.is_scalar) fail("Map body must be scalar", e.line);
        return Shape::vector(e.map_count);
      }

      case ExprKind::ReduceExpr: {
        if (depth + 1 > opt_.max_depth) {
          fail("Map/Reduce nesting exceeds depth " + std::to_string(opt_.max_depth), e.line);
        }
        Shape src = check_expr(*e.source, depth + 1);
        if (src.is_scalar) fail("Reduce needs a vector source", e.line);
        e.reduce_op = classify_combiner(e);
        return Shape::scalar();
      }
    }
    fail("unreachable expression kind");
  }

  // The combiner must be one of the three associative, order-independent
  // forms over exactly the two accumulator variables.
  ReduceOp classify_combiner(const Expr& e) const {
    const Expr& b = *e.body;
    auto is_pair = [&](const Expr& x, const Expr& y) {
      return x.kind == ExprKind::VarRef && y.kind == ExprKind::VarRef &&
             ((x.name == e.var1 && y.name == e.var2) ||
              (x.name == e.var2 && y.name == e.var1));
    };
    if (b.kind == ExprKind::Binary && b.op == '+' && is_pair(*b.args[0], *b.args[1])) {
      return ReduceOp::Add;
    }
    if (b.kind == ExprKind::Call && b.args.size() == 2 && is_pair(*b.args[0], *b.args[1])) {
      if (b.name == "max") return ReduceOp::Max;
      if (b.name == "min") return ReduceOp::Min;
    }
    fail("Reduce combiner must be a + b, max(a, b), or min(a, b)", e.line);
  }

  // Index expressions are affine in the loop variables. Bounds are checked at
  // the corners of the iteration box, which is exact for affine forms.
  void check_index_expr(const Expr& e, int dim) {
    std::set<std::string> vars;
    require_affine(e, vars, false);
    std::vector<std::pair<std::string, int>> used;
    for (const auto& [name, count] : loops_) {
      if (vars.count(name)) used.emplace_back(name, count);
    }
    size_t corners = size_t(1) << used.size();
    for (size_t mask = 0; mask < corners; ++mask) {
      std::map<std::string, long> env;
      for (size_t i = 0; i < used.size(); ++i) {
        env[used[i].first] = (mask >> i) & 1 ? used[i].second - 1 : 0;
      }
      long v = eval_affine(e, env);
      if (v < 0 || v >= dim) {
        fail("index out of range: value " + std::to_string(v) + " for dimension " +
                 std::to_string(dim),
             e.line);
      }
    }
  }

  void require_affine(const Expr& e, std::set<std::string>& vars, bool in_mul) const {
    switch (e.kind) {
      case ExprKind::Number: {
        double r = std::nearbyint(e.number);
        if (std::abs(e.number - r) > 1e-9) fail("index literals must be integers", e.line);
        return;
      }
      case ExprKind::VarRef: {
        if (loop_index(e.name) < 0) {
          fail("index expressions may only use loop variables and integers", e.line);
        }
        vars.insert(e.name);
        return;
      }
      case ExprKind::Binary: {
        if (e.op == '+' || e.op == '-') {
          if (in_mul) fail("index expressions must be affine", e.line);
          require_affine(*e.args[0], vars, false);
          require_affine(*e.args[1], vars, false);
          return;
        }
        if (e.op == '*') {
          bool l_const = is_const_int(*e.args[0]);
          bool r_const = is_const_int(*e.args[1]);
          if (!l_const && !r_const) fail("index expressions must be affine", e.line);
          require_affine(*e.args[0], vars, true);
          require_affine(*e.args[1], vars, true);
          return;
        }
        fail("operator not allowed in an index", e.line);
      }
      default:
        fail("expression not allowed in an index", e.line);
    }
  }

  static bool is_const_int(const Expr& e) {
    return e.kind == ExprKind::Number;
  }

  long eval_affine(const Expr& e, const std::map<std::string, long>& env) const {
    switch (e.kind) {
      case ExprKind::Number:
        return static_cast<long>(std::nearbyint(e.number));
      case ExprKind::VarRef:
        return env.at(e.name);
      case ExprKind::Binary: {
        long l = eval_affine(*e.args[0], env);
        long r = eval_affine(*e.args[1], env);
        switch (e.op) {
          case '+': return l + r;
          case '-': return l - r;
          case '*': return l * r;
        }
        fail("operator not allowed in an index", e.line);
      }
      default:
        fail("expression not allowed in an index", e.line);
    }
  }
};

}  // namespace detail

// Validates the program, resolving Reduce combiner classes in place.
inline void validate(Program& p, const ValidateOptions& opt = {}) {
  detail::Validator(p, opt).run();
}

}  // namespace mrdp

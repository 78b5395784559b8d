// mrdp - map-reduce data plane model - reference interpreter
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mrdp/dsl.hpp"
#include "mrdp/fixpoint.hpp"

namespace mrdp {

// Loads a tensor from csv text: comma separated decimals, one row per line,
// '#' comments and blank lines ignored. Values quantize on load.
inline std::vector<int64_t> tensor_from_csv(const std::string& text, FixedFormat fmt) {
  std::vector<int64_t> out;
  for (const std::string& raw_line : split(text, '\n')) {
    std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;
    for (const std::string& cell : split(line, ',')) {
      std::string v = trim(cell);
      if (v.empty()) continue;
      try {
        out.push_back(fx_quantize(std::stod(v), fmt));
      } catch (const std::exception&) {
        throw IoError("bad csv value '" + v + "'");
      }
    }
  }
  return out;
}

inline std::string tensor_to_csv(const std::vector<int64_t>& raw, FixedFormat fmt,
                                 size_t row_width = 0) {
  std::ostringstream os;
  for (size_t i = 0; i < raw.size(); ++i) {
    os << format_fixed(fx_to_double(raw[i], fmt), 6);
    bool eol = (row_width && (i + 1) % row_width == 0) || i + 1 == raw.size();
    os << (eol ? "\n" : ",");
  }
  return os.str();
}

// Tree-walking evaluator over raw fixed-point values. This is the semantic
// reference that the compiled fabric execution is tested against bit for bit.
class Interpreter {
 public:
  Interpreter(const Program& prog, const LutSet& luts) : prog_(prog), luts_(luts) {
    fmt_ = prog.format();
  }

  void set_tensor(const std::string& name, std::vector<int64_t> raw) {
    const TensorDecl* d = prog_.find_decl(name);
    if (!d) throw Error("set_tensor: unknown tensor '" + name + "'");
    if (static_cast<int64_t>(raw.size()) != d->words()) {
      throw Error("set_tensor: '" + name + "' expects " + std::to_string(d->words()) +
                  " words, got " + std::to_string(raw.size()));
    }
    env_[name] = std::move(raw);
  }

  // Evaluates all statements in order; returns every declared output.
  std::map<std::string, std::vector<int64_t>> run() {
    for (const auto& d : prog_.decls) {
      if (d.kind != TensorKind::Output && !env_.count(d.name)) {
        throw Error("run: tensor '" + d.name + "' was never set");
      }
    }
    for (const auto& s : prog_.stmts) {
      env_[s.target] = eval_value(*s.value);
      const TensorDecl* d = prog_.find_decl(s.target);
      if (d && env_[s.target].size() != static_cast<size_t>(d->words())) {
        env_[s.target].resize(d->words());
      }
    }
    std::map<std::string, std::vector<int64_t>> out;
    for (const auto& d : prog_.decls) {
      if (d.kind == TensorKind::Output) out[d.name] = env_.at(d.name);
    }
    return out;
  }

  FixedFormat format() const { return fmt_; }

 private:
  const Program& prog_;
  const LutSet& luts_;
  FixedFormat fmt_;
  std::map<std::string, std::vector<int64_t>> env_;
  std::vector<std::pair<std::string, int64_t>> loop_env_;

  std::vector<int64_t> eval_value(const Expr& e) {
    if (e.kind == ExprKind::MapExpr) return eval_vector(e);
    if (e.kind == ExprKind::VarRef) return env_.at(e.name);
    return {eval_scalar(e)};
  }

  std::vector<int64_t> eval_vector(const Expr& e) {
    if (e.kind == ExprKind::MapExpr) {
      std::vector<int64_t> out(e.map_count);
      loop_env_.emplace_back(e.var1, 0);
      for (int i = 0; i < e.map_count; ++i) {
        loop_env_.back().second = i;
        out[i] = eval_scalar(*e.body);
      }
      loop_env_.pop_back();
      return out;
    }
    if (e.kind == ExprKind::VarRef) return env_.at(e.name);
    throw Error("interp: expression is not a vector");
  }

  int64_t eval_scalar(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Number:
        return fx_quantize(e.number, fmt_);

      case ExprKind::VarRef: {
        const auto& v = env_.at(e.name);
        return v.at(0);
      }

      case ExprKind::Index: {
        const auto& v = env_.at(e.name);
        return v.at(flat_index(e));
      }

      case ExprKind::Binary: {
        int64_t l = eval_scalar(*e.args[0]);
        int64_t r = eval_scalar(*e.args[1]);
        switch (e.op) {
          case '+': return fx_add(l, r, fmt_);
          case '-': return fx_sub(l, r, fmt_);
          case '*': return fx_mul(l, r, fmt_);
          case '<': return fx_cmp_lt(l, r, fmt_);
          case 'g': return fx_cmp_ge(l, r, fmt_);
        }
        throw Error("interp: bad operator");
      }

      case ExprKind::Call:
        return eval_call(e);

      case ExprKind::ReduceExpr:
        return eval_reduce(e);

      default:
        throw Error("interp: expression is not scalar");
    }
  }

  int64_t eval_call(const Expr& e) {
    if (e.name == "relu") return fx_relu(eval_scalar(*e.args[0]));
    if (e.name == "leaky_relu") return fx_leaky_relu(eval_scalar(*e.args[0]), fmt_);
    if (e.name == "min") return fx_min(eval_scalar(*e.args[0]), eval_scalar(*e.args[1]));
    if (e.name == "max") return fx_max(eval_scalar(*e.args[0]), eval_scalar(*e.args[1]));
    if (e.name == "select") {
      int64_t c = eval_scalar(*e.args[0]);
      int64_t a = eval_scalar(*e.args[1]);
      int64_t b = eval_scalar(*e.args[2]);
      return fx_select(c, a, b);
    }
    // Remaining builtins are table lookups.
    return luts_.by_name(e.name).eval(eval_scalar(*e.args[0]));
  }

  // Reduce(+) runs through ReduceAccum: when the source is a Map whose body
  // is rooted at a multiply, the products feed the accumulator unrounded
  // (multiply-accumulate); any other element contributes its rounded value.
  int64_t eval_reduce(const Expr& e) {
    const Expr& src = *e.source;
    if (e.reduce_op == ReduceOp::Add) {
      ReduceAccum acc;
      if (src.kind == ExprKind::MapExpr && src.body->kind == ExprKind::Binary &&
          src.body->op == '*') {
        loop_env_.emplace_back(src.var1, 0);
        for (int i = 0; i < src.map_count; ++i) {
          loop_env_.back().second = i;
          int64_t a = eval_scalar(*src.body->args[0]);
          int64_t b = eval_scalar(*src.body->args[1]);
          acc.add_product(a, b);
        }
        loop_env_.pop_back();
      } else {
        for (int64_t v : eval_vector(src)) acc.add_value(v, fmt_);
      }
      return acc.finish(fmt_);
    }
    std::vector<int64_t> xs = eval_vector(src);
    return e.reduce_op == ReduceOp::Max ? fx_reduce_max(xs, fmt_) : fx_reduce_min(xs, fmt_);
  }

  size_t flat_index(const Expr& e) {
    std::vector<int> dims;
    if (const TensorDecl* d = prog_.find_decl(e.name)) {
      dims = d->dims;
    } else {
      dims = {static_cast<int>(env_.at(e.name).size())};
    }
    size_t flat = 0;
    for (size_t i = 0; i < e.args.size(); ++i) {
      flat = flat * dims[i] + static_cast<size_t>(eval_affine_index(*e.args[i]));
    }
    return flat;
  }

  int64_t eval_affine_index(const Expr& e) const {
    switch (e.kind) {
      case ExprKind::Number:
        return static_cast<int64_t>(std::nearbyint(e.number));
      case ExprKind::VarRef: {
        for (auto it = loop_env_.rbegin(); it != loop_env_.rend(); ++it) {
          if (it->first == e.name) return it->second;
        }
        throw Error("interp: unbound loop variable '" + e.name + "'");
      }
      case ExprKind::Binary: {
        int64_t l = eval_affine_index(*e.args[0]);
        int64_t r = eval_affine_index(*e.args[1]);
        switch (e.op) {
          case '+': return l + r;
          case '-': return l - r;
          case '*': return l * r;
        }
        throw Error("interp: bad index operator");
      }
      default:
        throw Error("interp: bad index expression");
    }
  }
};

}  // namespace mrdp

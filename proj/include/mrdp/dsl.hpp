// mrdp - map-reduce data plane model - DSL abstract syntax
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mrdp/common.hpp"
#include "mrdp/fixpoint.hpp"

namespace mrdp {

// The surface language is deliberately small: a program is a list of tensor
// declarations followed by single-assignment statements over Map / Reduce /
// scalar expressions. Everything the benchmarks need fits in this core.

enum class ExprKind { Number, VarRef, Index, Binary, Call, MapExpr, ReduceExpr };

enum class ReduceOp { Add, Max, Min };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  ExprKind kind;
  int line = 0;

  double number = 0.0;          // Number
  std::string name;             // VarRef: variable; Index: tensor; Call: builtin
  char op = 0;                  // Binary: one of + - * < g (>=)
  std::vector<ExprPtr> args;    // Binary: [lhs, rhs]; Index: index exprs; Call: args
  int map_count = 0;            // MapExpr
  std::string var1;             // MapExpr: loop var; ReduceExpr: left acc var
  std::string var2;             // ReduceExpr: right acc var
  ReduceOp reduce_op = ReduceOp::Add;  // ReduceExpr, set by validation
  ExprPtr body;                 // MapExpr: element body; ReduceExpr: combiner
  ExprPtr source;               // ReduceExpr: reduced vector

  ExprPtr clone() const {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->line = line;
    e->number = number;
    e->name = name;
    e->op = op;
    e->map_count = map_count;
    e->var1 = var1;
    e->var2 = var2;
    e->reduce_op = reduce_op;
    for (const auto& a : args) e->args.push_back(a->clone());
    if (body) e->body = body->clone();
    if (source) e->source = source->clone();
    return e;
  }
};

inline ExprPtr make_number(double v, int line = 0) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Number;
  e->number = v;
  e->line = line;
  return e;
}

inline ExprPtr make_var(std::string name, int line = 0) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::VarRef;
  e->name = std::move(name);
  e->line = line;
  return e;
}

inline ExprPtr make_binary(char op, ExprPtr lhs, ExprPtr rhs, int line = 0) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Binary;
  e->op = op;
  e->line = line;
  e->args.push_back(std::move(lhs));
  e->args.push_back(std::move(rhs));
  return e;
}

inline ExprPtr make_call(std::string fn, std::vector<ExprPtr> args, int line = 0) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Call;
  e->name = std::move(fn);
  e->args = std::move(args);
  e->line = line;
  return e;
}

inline ExprPtr make_index(std::string tensor, std::vector<ExprPtr> idx, int line = 0) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Index;
  e->name = std::move(tensor);
  e->args = std::move(idx);
  e->line = line;
  return e;
}

// ==========================================================================
// declarations / program
// ==========================================================================

enum class TensorKind { Input, Output, Weights };

struct TensorDecl {
  TensorKind kind = TensorKind::Input;
  std::string name;
  std::string type_name = "fix8";
  std::vector<int> dims;     // rank 1 or 2
  bool scalars = false;      // input arrives as per-element scalar streams
  std::string load_path;     // weights only: csv file, relative to program

  int64_t words() const {
    int64_t w = 1;
    for (int d : dims) w *= d;
    return w;
  }
  FixedFormat format() const { return format_from_name(type_name); }
};

struct Statement {
  std::string target;
  ExprPtr value;
  int line = 0;
};

struct Program {
  std::string name;
  std::vector<TensorDecl> decls;
  std::vector<Statement> stmts;

  const TensorDecl* find_decl(const std::string& n) const {
    for (const auto& d : decls)
      if (d.name == n) return &d;
    return nullptr;
  }

  FixedFormat format() const {
    return decls.empty() ? kFix16 : decls.front().format();
  }

  std::vector<const TensorDecl*> of_kind(TensorKind k) const {
    std::vector<const TensorDecl*> out;
    for (const auto& d : decls)
      if (d.kind == k) out.push_back(&d);
    return out;
  }
};

// ==========================================================================
// printer (round trips through the parser)
// ==========================================================================

namespace detail {

inline int precedence(char op) {
  switch (op) {
    case '<':
    case 'g': return 1;
    case '+':
    case '-': return 2;
    case '*': return 3;
    default: return 0;
  }
}

inline void print_expr(std::ostream& os, const Expr& e, int parent_prec = 0);

inline void print_binary(std::ostream& os, const Expr& e, int parent_prec) {
  int prec = precedence(e.op);
  bool paren = prec < parent_prec;
  if (paren) os << "(";
  print_expr(os, *e.args[0], prec);
  if (e.op == 'g') os << " >= ";
  else os << " " << e.op << " ";
  // Right operand binds tighter to keep a - b - c unambiguous.
  print_expr(os, *e.args[1], prec + 1);
  if (paren) os << ")";
}

inline void print_expr(std::ostream& os, const Expr& e, int parent_prec) {
  switch (e.kind) {
    case ExprKind::Number: {
      std::ostringstream ss;
      ss << e.number;
      os << ss.str();
      break;
    }
    case ExprKind::VarRef:
      os << e.name;
      break;
    case ExprKind::Index: {
      os << e.name << "[";
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, *e.args[i]);
      }
      os << "]";
      break;
    }
    case ExprKind::Binary:
      print_binary(os, e, parent_prec);
      break;
    case ExprKind::Call: {
      os << e.name << "(";
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, *e.args[i]);
      }
      os << ")";
      break;
    }
    case ExprKind::MapExpr: {
      os << "Map(" << e.map_count << ") { " << e.var1 << " => ";
      print_expr(os, *e.body);
      os << " }";
      break;
    }
    case ExprKind::ReduceExpr: {
      os << "Reduce(";
      print_expr(os, *e.source);
      os << ") { (" << e.var1 << ", " << e.var2 << ") => ";
      print_expr(os, *e.body);
      os << " }";
      break;
    }
  }
}

}  // namespace detail

inline std::string to_source(const Expr& e) {
  std::ostringstream os;
  detail::print_expr(os, e);
  return os.str();
}

inline std::string to_source(const Program& p) {
  std::ostringstream os;
  os << "program " << p.name << " {\n";
  for (const auto& d : p.decls) {
    os << "  ";
    switch (d.kind) {
      case TensorKind::Input: os << "input "; break;
      case TensorKind::Output: os << "output "; break;
      case TensorKind::Weights: os << "weights "; break;
    }
    os << d.name << ": " << d.type_name << "[";
    for (size_t i = 0; i < d.dims.size(); ++i) {
      if (i) os << ", ";
      os << d.dims[i];
    }
    os << "]";
    if (d.scalars) os << " scalars";
    if (d.kind == TensorKind::Weights) os << " = load(\"" << d.load_path << "\")";
    os << ";\n";
  }
  if (!p.stmts.empty()) os << "\n";
  for (const auto& s : p.stmts) {
    os << "  " << s.target << " = " << to_source(*s.value) << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace mrdp

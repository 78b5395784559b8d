// mrdp - map-reduce data plane model - compiler: lowering, mapping, estimate
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mrdp/dsl.hpp"
#include "mrdp/fabric.hpp"
#include "mrdp/validate.hpp"

namespace mrdp {

// One hardware pipeline's share of the reference chip budget, used to report
// the relative cost of adding inference to a pipeline.
inline constexpr double kPipelineAreaBudgetMm2 = 300.0 / 4.0;
inline constexpr double kPipelinePowerBudgetMw = 25000.0;

struct CompileOptions {
  FabricConfig fabric;
  // Unroll degree: 0 means fully spatial (one instance per job). Per
  // statement overrides use the statement target as key; a chunk combiner
  // takes its unroll from "<target>.comb".
  int default_unroll = 0;
  std::map<std::string, int> unroll;
};

struct PerfReport {
  std::string program;
  int cus = 0;
  int mus = 0;
  int links = 0;
  int ii = 1;
  double rate_gpps = 0.0;
  double latency_cycles = 0.0;
  double latency_ns = 0.0;
  double area_mm2 = 0.0;
  double power_mw = 0.0;
  double area_overhead_pct = 0.0;
  double power_overhead_pct = 0.0;

  std::string to_kv() const {
    std::ostringstream os;
    os << "#mrdp-report v1\n";
    os << "program = " << program << "\n";
    os << "compute_units = " << cus << "\n";
    os << "memory_units = " << mus << "\n";
    os << "links = " << links << "\n";
    os << "ii = " << ii << "\n";
    os << "rate_gpps = " << format_fixed(rate_gpps, 6) << "\n";
    os << "latency_cycles = " << format_fixed(latency_cycles, 2) << "\n";
    os << "latency_ns = " << format_fixed(latency_ns, 2) << "\n";
    os << "area_mm2 = " << format_fixed(area_mm2, 6) << "\n";
    os << "power_mw = " << format_fixed(power_mw, 3) << "\n";
    os << "area_overhead_pct = " << format_fixed(area_overhead_pct, 3) << "\n";
    os << "power_overhead_pct = " << format_fixed(power_overhead_pct, 3) << "\n";
    return os.str();
  }
};

enum class NodeKind { Input, Output, MapReduce, Combine, Eltwise, ScalarBlock, Lut, BufferMu };

inline const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Output: return "output";
    case NodeKind::MapReduce: return "map_reduce";
    case NodeKind::Combine: return "combine";
    case NodeKind::Eltwise: return "eltwise";
    case NodeKind::ScalarBlock: return "scalar_block";
    case NodeKind::Lut: return "lut";
    case NodeKind::BufferMu: return "buffer";
  }
  return "?";
}

// Operand of a primitive op. Element addressing is affine in the iteration
// coordinates: elem = c0 + ci*iter + cj*lane. Lane is only meaningful inside
// a fused reduce; everywhere else cj is zero and iter is the output item.
struct OperandRef {
  enum class Src { Prev, Stream, Weight, Imm };
  Src src = Src::Imm;
  int edge = -1;     // Stream: index into node inputs; Prev in a block: op slot
  int weight = -1;   // Weight: index into the program declarations
  int64_t imm = 0;   // Imm: raw fixed-point value
  long c0 = 0, ci = 0, cj = 0;
};

// Primitive op codes: + - * < g(>=) x(max) n(min) s(select) r(relu)
// l(leaky_relu) L(lut) =(move).
struct ProtoOp {
  char code = '=';
  std::string lut;
  std::vector<OperandRef> ins;
};

struct NodeInput {
  int node = -1;
  int slot = 0;
  bool operator==(const NodeInput&) const = default;
};

struct ProtoNode {
  int id = -1;
  NodeKind kind = NodeKind::Eltwise;
  std::string label;             // statement target this node belongs to
  int width = 1;                 // items produced
  std::vector<NodeInput> inputs;

  // MapReduce
  ReduceOp rop = ReduceOp::Add;
  bool mac = false;
  int reduce_width = 0;
  std::vector<ProtoOp> lane_ops;  // chain, execution order; last op is the root
  std::vector<ProtoOp> tails;     // scalar epilogue after the reduce finishes
  bool emits_partials = false;

  // Combine
  int n_partial_edges = 0;        // prefix of `inputs` carrying partial sums

  // Eltwise / ScalarBlock / Lut
  std::vector<ProtoOp> ops;

  // Input / Output
  std::string tensor;
  bool scalars = false;

  // BufferMu
  int buffered_consumer = -1;

  // schedule / placement
  int jobs = 1;
  int instances = 1;
  std::vector<Coord> cells;

  bool is_cu() const {
    return kind == NodeKind::MapReduce || kind == NodeKind::Combine ||
           kind == NodeKind::Eltwise || kind == NodeKind::ScalarBlock ||
           kind == NodeKind::Lut;
  }
};

struct MuShard {
  std::string tensor;
  int64_t words = 0;
  int reads = 0;  // elements read per cycle
};

struct MuUnit {
  int id = -1;
  Coord cell;
  bool is_buffer = false;
  int buffer_node = -1;      // BufferMu proto node
  int buffer_instance = -1;
  std::vector<MuShard> shards;
  std::vector<std::pair<int, int>> consumers;  // (node, instance)
  int64_t words = 0;
  int reads = 0;
};

struct Module {
  std::string name;
  FabricConfig fabric;
  FixedFormat fmt;
  std::vector<TensorDecl> decls;
  std::vector<ProtoNode> nodes;
  std::vector<MuUnit> mus;
  CompileOptions opts;
  PerfReport perf;

  const ProtoNode* find_io(NodeKind k, const std::string& tensor) const {
    for (const auto& n : nodes)
      if (n.kind == k && n.tensor == tensor) return &n;
    return nullptr;
  }
};

// ==========================================================================
// lowering
// ==========================================================================

namespace detail {

struct ValueRef {
  int node = -1;
  int slot = 0;
  int width = 1;
};

inline bool is_leaf_expr(const Expr& e) {
  return e.kind == ExprKind::Number || e.kind == ExprKind::VarRef ||
         e.kind == ExprKind::Index;
}

inline bool is_lut_call(const Expr& e) {
  return e.kind == ExprKind::Call &&
         (e.name == "sigmoid" || e.name == "tanh" || e.name == "exp" || e.name == "recip");
}

inline char op_code_of(const Expr& e) {
  if (e.kind == ExprKind::Binary) return e.op;
  if (e.kind == ExprKind::Call) {
    if (e.name == "max") return 'x';
    if (e.name == "min") return 'n';
    if (e.name == "select") return 's';
    if (e.name == "relu") return 'r';
    if (e.name == "leaky_relu") return 'l';
  }
  throw CompileError("expression has no primitive op");
}

// Structural equality, used to recognise squares like (a - b) * (a - b).
inline bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.name != b.name || a.op != b.op ||
      a.map_count != b.map_count || a.var1 != b.var1 || a.var2 != b.var2)
    return false;
  if (a.kind == ExprKind::Number) return a.number == b.number;
  if (a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!expr_equal(*a.args[i], *b.args[i])) return false;
  if (!!a.body != !!b.body || (a.body && !expr_equal(*a.body, *b.body))) return false;
  if (!!a.source != !!b.source || (a.source && !expr_equal(*a.source, *b.source)))
    return false;
  return true;
}

class Lowerer {
 public:
  Lowerer(const Program& prog, const CompileOptions& opts) : prog_(prog), opts_(opts) {
    mod_.name = prog.name;
    mod_.fabric = opts.fabric;
    mod_.fmt = prog.format();
    mod_.decls = prog.decls;
    mod_.opts = opts;
  }

  Module run() {
    for (const auto& d : prog_.decls) {
      if (d.kind != TensorKind::Input) continue;
      ProtoNode n;
      n.kind = NodeKind::Input;
      n.tensor = d.name;
      n.label = d.name;
      n.width = d.dims[0];
      n.scalars = d.scalars;
      values_[d.name] = {add_node(std::move(n)), 0, d.dims[0]};
    }
    for (const auto& s : prog_.stmts) lower_statement(s);
    for (const auto& d : prog_.decls) {
      if (d.kind != TensorKind::Output) continue;
      auto it = values_.find(d.name);
      if (it == values_.end()) throw CompileError("output '" + d.name + "' has no value");
      ProtoNode n;
      n.kind = NodeKind::Output;
      n.tensor = d.name;
      n.label = d.name;
      n.width = d.dims[0];
      int id = add_node(std::move(n));
      add_edge(id, {it->second.node, it->second.slot});
    }
    prune();
    return std::move(mod_);
  }

 private:
  const Program& prog_;
  const CompileOptions& opts_;
  Module mod_;
  std::map<std::string, ValueRef> values_;
  std::vector<int> consumers_;   // per node: consuming edge count
  int current_block_ = -1;       // open scalar epilogue unit
  int chain_tail_ = -1;          // open eltwise chain within the current statement
  std::string cur_label_;

  // ---- graph helpers ----

  int add_node(ProtoNode n) {
    n.id = static_cast<int>(mod_.nodes.size());
    if (n.label.empty()) n.label = cur_label_;
    mod_.nodes.push_back(std::move(n));
    consumers_.push_back(0);
    return mod_.nodes.back().id;
  }

  ProtoNode& node(int id) { return mod_.nodes[id]; }

  int add_edge(int dst, NodeInput in) {
    auto& ins = node(dst).inputs;
    for (size_t i = 0; i < ins.size(); ++i)
      if (ins[i] == in) return static_cast<int>(i);
    ins.push_back(in);
    ++consumers_[in.node];
    return static_cast<int>(ins.size()) - 1;
  }

  // ---- affine addressing ----

  static long eval_index(const Expr& e, const std::string& vi, long i, const std::string& vj,
                         long j) {
    switch (e.kind) {
      case ExprKind::Number:
        return static_cast<long>(std::nearbyint(e.number));
      case ExprKind::VarRef:
        if (e.name == vi) return i;
        if (e.name == vj) return j;
        throw CompileError("index uses a variable outside the fused loops");
      case ExprKind::Binary: {
        long l = eval_index(*e.args[0], vi, i, vj, j);
        long r = eval_index(*e.args[1], vi, i, vj, j);
        if (e.op == '+') return l + r;
        if (e.op == '-') return l - r;
        if (e.op == '*') return l * r;
        throw CompileError("bad index operator");
      }
      default:
        throw CompileError("bad index expression");
    }
  }

  // Flattened affine coefficients over (iter, lane) for a subscripted tensor.
  void affine_of(const Expr& idx, const std::vector<int>& dims, const std::string& vi,
                 const std::string& vj, long& c0, long& ci, long& cj) {
    auto flat = [&](long i, long j) {
      long f = 0;
      for (size_t d = 0; d < idx.args.size(); ++d) {
        f = f * dims[d] + eval_index(*idx.args[d], vi, i, vj, j);
      }
      return f;
    };
    c0 = flat(0, 0);
    ci = flat(1, 0) - c0;
    cj = flat(0, 1) - c0;
  }

  // ---- leaf operands ----

  struct Ctx {
    std::string iter_var;  // output item variable ("" for scalar statements)
    std::string lane_var;  // reduce element variable ("" outside a fused reduce)
    int width = 1;         // items
    int lane_width = 0;    // reduce width when lane_var is set
  };

  // Resolves a leaf stream reference without emitting anything. True when
  // `e` names an existing value; prev_ok reports whether the reference reads
  // that node's newest row elementwise, i.e. it can ride the op chain.
  bool peek_ref(const Expr& e, const Ctx& ctx, ValueRef& val, bool& prev_ok) {
    prev_ok = false;
    if (e.kind == ExprKind::VarRef) {
      auto it = values_.find(e.name);
      if (it == values_.end()) return false;
      val = it->second;
      prev_ok = val.width == ctx.width;
      return true;
    }
    if (e.kind != ExprKind::Index) return false;
    const TensorDecl* d = prog_.find_decl(e.name);
    if (d && d->kind == TensorKind::Weights) return false;
    auto it = values_.find(e.name);
    if (it == values_.end()) return false;
    val = it->second;
    std::vector<int> dims = d ? d->dims : std::vector<int>{val.width};
    long c0, ci, cj;
    affine_of(e, dims, ctx.iter_var, ctx.lane_var, c0, ci, cj);
    prev_ok = ctx.lane_var.empty() && c0 == 0 && ci == 1 && cj == 0 &&
              val.width == ctx.width;
    return true;
  }

  // True when reading `val` from inside `host` must use the chain register:
  // the newest row of the very node the op is being appended to.
  bool reads_own_tail(int host, const ValueRef& val) const {
    return val.node == host && mod_.nodes[host].kind == NodeKind::Eltwise &&
           val.slot == static_cast<int>(mod_.nodes[host].ops.size()) - 1;
  }

  OperandRef leaf_operand(int host, const Expr& e, const Ctx& ctx) {
    OperandRef r;
    if (e.kind == ExprKind::Number) {
      r.src = OperandRef::Src::Imm;
      r.imm = fx_quantize(e.number, mod_.fmt);
      return r;
    }
    if (e.kind == ExprKind::VarRef) {
      auto it = values_.find(e.name);
      if (it == values_.end()) throw CompileError("unknown value '" + e.name + "'");
      if (it->second.node == host && mod_.nodes[host].kind == NodeKind::ScalarBlock) {
        r.src = OperandRef::Src::Prev;  // value lives in this block
        r.edge = it->second.slot;
        return r;
      }
      if (reads_own_tail(host, it->second) && it->second.width == ctx.width) {
        r.src = OperandRef::Src::Prev;
        r.edge = -1;
        return r;
      }
      if (it->second.node == host)
        throw CompileError("internal: self reference in op chain");
      r.src = OperandRef::Src::Stream;
      r.edge = add_edge(host, {it->second.node, it->second.slot});
      r.c0 = 0;
      r.ci = it->second.width > 1 ? 1 : 0;  // whole-vector or scalar tap
      return r;
    }
    // Index
    const TensorDecl* d = prog_.find_decl(e.name);
    long c0, ci, cj;
    if (d && d->kind == TensorKind::Weights) {
      affine_of(e, d->dims, ctx.iter_var, ctx.lane_var, c0, ci, cj);
      r.src = OperandRef::Src::Weight;
      for (size_t w = 0; w < mod_.decls.size(); ++w)
        if (mod_.decls[w].name == e.name) r.weight = static_cast<int>(w);
      r.c0 = c0;
      r.ci = ci;
      r.cj = cj;
      return r;
    }
    ValueRef src;
    std::vector<int> dims;
    if (d) {  // input (or already-assigned output read back)
      src = values_.at(e.name);
      dims = d->dims;
    } else {
      src = values_.at(e.name);
      dims = {src.width};
    }
    affine_of(e, dims, ctx.iter_var, ctx.lane_var, c0, ci, cj);
    r.src = OperandRef::Src::Stream;
    r.c0 = c0;
    r.ci = ci;
    r.cj = cj;

    bool in_lane = !ctx.lane_var.empty();
    bool direct;
    if (in_lane) {
      // Vector-lane reads must be the identity; per-item or fixed scalar taps
      // are fine on the scalar bus.
      direct = (cj == 0) || (c0 == 0 && ci == 0 && cj == 1);
    } else {
      direct = (ci == 0) || (c0 == 0 && ci == 1 && cj == 0);
    }
    if (reads_own_tail(host, src) && !in_lane && c0 == 0 && ci == 1 && cj == 0 &&
        src.width == ctx.width) {
      r.src = OperandRef::Src::Prev;
      r.edge = -1;
      return r;
    }
    if (src.node == host)
      throw CompileError("internal: self reference in op chain");
    if (direct) {
      r.edge = add_edge(host, {src.node, src.slot});
      return r;
    }
    // Reordered access: stage the producer stream through a buffer memory.
    int buf = buffer_for(src, host);
    r.edge = add_edge(host, {buf, 0});
    return r;
  }

  int buffer_for(ValueRef src, int consumer) {
    // One buffer node per (producer, consumer) pair.
    for (const auto& n : mod_.nodes) {
      if (n.kind == NodeKind::BufferMu && n.buffered_consumer == consumer &&
          !n.inputs.empty() && n.inputs[0].node == src.node && n.inputs[0].slot == src.slot)
        return n.id;
    }
    ProtoNode b;
    b.kind = NodeKind::BufferMu;
    b.width = src.width;
    b.buffered_consumer = consumer;
    int id = add_node(std::move(b));
    add_edge(id, {src.node, src.slot});
    return id;
  }

  // ---- statements ----

  void lower_statement(const Statement& s) {
    cur_label_ = s.target;
    const Expr& e = *s.value;

    if (e.kind == ExprKind::VarRef) {  // pure alias
      values_[s.target] = values_.at(e.name);
      return;
    }
    if (e.kind == ExprKind::MapExpr) {
      // A later scalar block must not feed from nodes created after it:
      // vector statements close the open block.
      current_block_ = -1;
      values_[s.target] = lower_map_statement(e);
      return;
    }
    // Scalar statement (Reduce, call, binary, index, number).
    values_[s.target] = lower_scalar_expr(e);
  }

  // Map statement: try the fused reduce-with-tail form first, otherwise
  // decompose the body into elementwise / lut / reduce nodes.
  ValueRef lower_map_statement(const Expr& map) {
    Ctx ctx;
    ctx.iter_var = map.var1;
    ctx.width = map.map_count;

    // Peel scalar tail ops off the body looking for a Reduce at the root of
    // a single-use chain.
    std::vector<const Expr*> chain;
    const Expr* cur = map.body.get();
    while (chain.size() < static_cast<size_t>(opts_.fabric.max_tail_ops) + 1) {
      if (cur->kind == ExprKind::ReduceExpr) break;
      if (is_lut_call(*cur)) break;
      if (cur->kind != ExprKind::Binary && cur->kind != ExprKind::Call) break;
      const Expr* next = nullptr;
      bool ok = true;
      for (const auto& a : cur->args) {
        if (is_leaf_expr(*a)) continue;
        if (next) { ok = false; break; }
        next = a.get();
      }
      if (!ok || !next) break;
      chain.push_back(cur);
      cur = next;
    }
    if (cur->kind == ExprKind::ReduceExpr &&
        chain.size() <= static_cast<size_t>(opts_.fabric.max_tail_ops)) {
      ValueRef red = lower_reduce(*cur, ctx);
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        red = append_tail(red, **it, cur, ctx);
        cur = nullptr;  // only the first tail replaces the reduce ref
      }
      return red;
    }
    return lower_vector_expr(*map.body, ctx);
  }

  // Appends one scalar op to the finishing node of `red`, replacing the
  // sub-expression `replaced` (or any operand equal to the running value).
  ValueRef append_tail(ValueRef red, const Expr& op, const Expr* replaced, const Ctx& ctx) {
    ProtoNode& fin = node(red.node);
    ProtoOp t;
    t.code = op_code_of(op);
    for (const auto& a : op.args) {
      if (a.get() == replaced || (!is_leaf_expr(*a) && replaced == nullptr)) {
        OperandRef p;
        p.src = OperandRef::Src::Prev;
        t.ins.push_back(p);
      } else {
        t.ins.push_back(leaf_operand(red.node, *a, ctx));
      }
    }
    fin.tails.push_back(std::move(t));
    red.slot = static_cast<int>(fin.tails.size());
    return red;
  }

  // ---- reduces ----

  ValueRef lower_reduce(const Expr& re, const Ctx& outer) {
    const FabricConfig& fb = opts_.fabric;
    ProtoNode mr;
    mr.kind = NodeKind::MapReduce;
    mr.rop = re.reduce_op;
    mr.width = outer.width;

    Ctx lane_ctx = outer;

    int id = -1;
    if (re.source->kind == ExprKind::MapExpr) {
      const Expr& src = *re.source;
      lane_ctx.lane_var = src.var1;
      lane_ctx.lane_width = src.map_count;
      mr.reduce_width = src.map_count;
      mr.mac = (re.reduce_op == ReduceOp::Add && src.body->kind == ExprKind::Binary &&
                src.body->op == '*');
      id = add_node(std::move(mr));
      build_lane_chain(id, *src.body, lane_ctx);
    } else {
      // Reduce over an existing vector stream.
      ValueRef v = resolve_vector(*re.source, outer);
      mr.reduce_width = v.width;
      id = add_node(std::move(mr));
      ProtoOp mv;
      mv.code = '=';
      OperandRef r;
      r.src = OperandRef::Src::Stream;
      r.edge = add_edge(id, {v.node, v.slot});
      r.cj = 1;
      mv.ins.push_back(r);
      node(id).lane_ops.push_back(std::move(mv));
    }

    ProtoNode& n = node(id);
    int chunks = (n.reduce_width + fb.lanes - 1) / fb.lanes;
    n.jobs = outer.width * chunks;
    if (chunks > 1) {
      n.emits_partials = true;
      ProtoNode comb;
      comb.kind = NodeKind::Combine;
      comb.rop = n.rop;
      comb.width = outer.width;
      comb.jobs = outer.width;
      comb.label = cur_label_ + ".comb";
      int cid = add_node(std::move(comb));
      add_edge(cid, {id, 0});
      node(cid).n_partial_edges = 1;
      return {cid, 0, outer.width};
    }
    return {id, 0, outer.width};
  }

  // Decomposes a reduce body into an in-unit lane chain plus spilled vector
  // nodes. The chain is built root-last: ops execute bottom-up.
  void build_lane_chain(int id, const Expr& body, const Ctx& ctx) {
    const FabricConfig& fb = opts_.fabric;
    std::vector<const Expr*> rchain;  // root first
    const Expr* cur = &body;
    int budget = fb.stages;
    while (true) {
      if (is_leaf_expr(*cur)) {
        // Pure stream/weight element: a zero-cost move feeds the tree.
        ProtoOp mv;
        mv.code = '=';
        mv.ins.push_back(leaf_operand(id, *cur, ctx));
        node(id).lane_ops.push_back(std::move(mv));
        break;
      }
      if (static_cast<int>(rchain.size()) == budget || is_lut_call(*cur) ||
          cur->kind == ExprKind::ReduceExpr || cur->kind == ExprKind::MapExpr) {
        // Out of rows (or unsupported in-lane op): compute the rest outside.
        ValueRef spill = spill_vector(*cur, ctx);
        ProtoOp mv;
        mv.code = '=';
        OperandRef r;
        r.src = OperandRef::Src::Stream;
        r.edge = add_edge(id, {spill.node, spill.slot});
        r.cj = 1;
        mv.ins.push_back(r);
        node(id).lane_ops.push_back(std::move(mv));
        break;
      }
      rchain.push_back(cur);
      // Pick the operand the chain continues through (the first non-leaf;
      // a structurally equal twin rides as a second Prev, anything else
      // spills at emit time).
      const Expr* next = nullptr;
      for (const auto& a : cur->args) {
        if (!is_leaf_expr(*a) && !next) next = a.get();
      }
      if (!next) {
        // All operands are leaves: done, ops below will emit in order.
        break;
      }
      cur = next;
    }
    // Emit deepest-first so Prev refers to the running lane value.
    // rchain is root-first: rchain[k + 1] is the subtree rchain[k] descended
    // into.
    for (int k = static_cast<int>(rchain.size()) - 1; k >= 0; --k) {
      const Expr& op = *rchain[k];
      const Expr* descended =
          k + 1 < static_cast<int>(rchain.size()) ? rchain[k + 1] : nullptr;
      ProtoOp p;
      p.code = op_code_of(op);
      bool used_prev = false;
      for (const auto& a : op.args) {
        bool is_computed = !is_leaf_expr(*a);
        bool take_prev = false;
        if (is_computed) {
          if (descended && (a.get() == descended || expr_equal(*a, *descended))) {
            take_prev = true;  // the chain value (or its structural twin)
          } else if (!descended && !node(id).lane_ops.empty() && !used_prev) {
            take_prev = true;  // deepest op consuming a spilled/leaf move
          }
        }
        if (take_prev) {
          OperandRef r;
          r.src = OperandRef::Src::Prev;
          p.ins.push_back(r);
          used_prev = true;
        } else if (is_computed) {
          ValueRef spill = spill_vector(*a, ctx);
          OperandRef r;
          r.src = OperandRef::Src::Stream;
          r.edge = add_edge(id, {spill.node, spill.slot});
          r.cj = 1;
          p.ins.push_back(r);
        } else {
          p.ins.push_back(leaf_operand(id, *a, ctx));
        }
      }
      node(id).lane_ops.push_back(std::move(p));
    }
  }

  // Spills lane computation into standalone vector nodes over the reduce
  // element variable. The spilled subtree may not reference the outer map
  // variable (that would need per-iteration re-materialisation).
  ValueRef spill_vector(const Expr& e, const Ctx& ctx) {
    if (!ctx.iter_var.empty() && references_var(e, ctx.iter_var)) {
      throw CompileError(
          "reduce body too deep to fuse and dependent on the outer map variable");
    }
    Ctx spill_ctx;
    spill_ctx.iter_var = ctx.lane_var;
    spill_ctx.width = ctx.lane_width;
    return lower_vector_expr(e, spill_ctx);
  }

  static bool references_var(const Expr& e, const std::string& v) {
    if (e.kind == ExprKind::VarRef && e.name == v) return true;
    for (const auto& a : e.args)
      if (references_var(*a, v)) return true;
    if (e.body && references_var(*e.body, v)) return true;
    if (e.source && references_var(*e.source, v)) return true;
    return false;
  }

  // ---- vector expressions ----

  ValueRef resolve_vector(const Expr& e, const Ctx& ctx) {
    (void)ctx;
    if (e.kind == ExprKind::VarRef) {
      auto it = values_.find(e.name);
      if (it == values_.end()) throw CompileError("unknown value '" + e.name + "'");
      return it->second;
    }
    if (e.kind == ExprKind::MapExpr) {
      Ctx inner;
      inner.iter_var = e.var1;
      inner.width = e.map_count;
      return lower_vector_expr(*e.body, inner);
    }
    throw CompileError("expected a vector-producing expression");
  }

  // Lowers a scalar-per-item expression over `ctx.width` items into eltwise
  // chains, lut nodes and reduces. Returns the producing value.
  ValueRef lower_vector_expr(const Expr& e, const Ctx& ctx) {
    bool scalar = ctx.width == 1 && ctx.iter_var.empty();

    if (e.kind == ExprKind::ReduceExpr) return lower_reduce(e, ctx);

    if (is_leaf_expr(e)) {
      // A bare element copy becomes a one-op move node.
      return emit_op(e, '=', {&e}, ctx, scalar);
    }

    if (is_lut_call(e)) {
      bool leaf_arg = is_leaf_expr(*e.args[0]);
      ValueRef arg;
      if (!leaf_arg) arg = lower_vector_expr(*e.args[0], ctx);
      ProtoNode lut;
      lut.kind = NodeKind::Lut;
      lut.width = ctx.width;
      lut.jobs = (ctx.width + opts_.fabric.lanes - 1) / opts_.fabric.lanes;
      int id = add_node(std::move(lut));
      ProtoOp op;
      op.code = 'L';
      op.lut = e.name;
      if (leaf_arg) {
        op.ins.push_back(leaf_operand(id, *e.args[0], ctx));
      } else {
        OperandRef r;
        r.src = OperandRef::Src::Stream;
        r.edge = add_edge(id, {arg.node, arg.slot});
        r.ci = arg.width > 1 ? 1 : 0;
        op.ins.push_back(r);
      }
      node(id).ops.push_back(std::move(op));
      chain_tail_ = -1;
      return {id, 0, ctx.width};
    }

    char code = op_code_of(e);

    // Additions over reduce results fold into the finishing nodes: partial
    // combiners merge, fresh finishers absorb tails.
    if (code == '+') {
      ValueRef folded;
      if (try_fold_add(e, ctx, folded)) return folded;
    }

    std::vector<const Expr*> args;
    for (const auto& a : e.args) args.push_back(a.get());
    return emit_op(e, code, args, ctx, scalar);
  }

  bool is_fresh_finisher(int id) const {
    const ProtoNode& n = mod_.nodes[id];
    if (consumers_[id] != 0) return false;
    if (n.kind == NodeKind::Combine) return true;
    if (n.kind == NodeKind::MapReduce && !n.emits_partials) return true;
    return false;
  }

  int tail_budget(int id) const {
    return opts_.fabric.max_tail_ops - static_cast<int>(mod_.nodes[id].tails.size());
  }

  // a + b where a side is a reduce finisher: merge combiners / fold tails.
  bool try_fold_add(const Expr& e, const Ctx& ctx, ValueRef& out) {
    const Expr& le = *e.args[0];
    const Expr& rhs = *e.args[1];
    if (is_leaf_expr(le) && is_leaf_expr(rhs)) return false;

    ValueRef l, r;
    bool l_val = !is_leaf_expr(le), r_val = !is_leaf_expr(rhs);
    if (l_val) l = lower_vector_expr(le, ctx);
    if (r_val) r = lower_vector_expr(rhs, ctx);

    // Merge two combiners: the partial streams share one accumulator unit.
    if (l_val && r_val && node(l.node).kind == NodeKind::Combine &&
        node(r.node).kind == NodeKind::Combine && is_fresh_finisher(l.node) &&
        is_fresh_finisher(r.node) && node(l.node).width == node(r.node).width &&
        node(l.node).rop == node(r.node).rop && node(l.node).tails.empty() &&
        node(r.node).tails.empty()) {
      ProtoNode& cl = node(l.node);
      ProtoNode& cr = node(r.node);
      for (int i = 0; i < cr.n_partial_edges; ++i) {
        add_edge(l.node, cr.inputs[i]);
        ++cl.n_partial_edges;
      }
      // The right combiner loses its purpose; it will be pruned.
      for (const auto& in : cr.inputs) --consumers_[in.node];
      cr.inputs.clear();
      out = l;
      return true;
    }

    // Fold the addition into a fresh finisher as a tail op.
    auto fold_into = [&](ValueRef fin, const Expr* other_e, ValueRef other_v,
                         bool other_is_val) -> bool {
      if (!is_fresh_finisher(fin.node) || tail_budget(fin.node) < 1) return false;
      // Only the node's newest stage may grow; older stage refs keep their value.
      if (fin.slot != static_cast<int>(node(fin.node).tails.size())) return false;
      ProtoOp t;
      t.code = '+';
      OperandRef p;
      p.src = OperandRef::Src::Prev;
      t.ins.push_back(p);
      if (other_is_val) {
        OperandRef s;
        s.src = OperandRef::Src::Stream;
        s.edge = add_edge(fin.node, {other_v.node, other_v.slot});
        s.ci = other_v.width > 1 ? 1 : 0;
        t.ins.push_back(s);
      } else {
        t.ins.push_back(leaf_operand(fin.node, *other_e, ctx));
      }
      node(fin.node).tails.push_back(std::move(t));
      fin.slot = static_cast<int>(node(fin.node).tails.size());
      out = fin;
      return true;
    };

    if (l_val && (node(l.node).kind == NodeKind::Combine ||
                  node(l.node).kind == NodeKind::MapReduce)) {
      if (fold_into(l, r_val ? nullptr : &rhs, r, r_val)) return true;
    }
    if (r_val && (node(r.node).kind == NodeKind::Combine ||
                  node(r.node).kind == NodeKind::MapReduce)) {
      if (fold_into(r, l_val ? nullptr : &le, l, l_val)) return true;
    }

    // No fold: emit a regular op over the already-lowered values, chaining
    // into one of them (or a leaf operand's open node) when it is still open.
    bool scalar = ctx.width == 1 && ctx.iter_var.empty();
    std::vector<ValueRef> vals{l, r};
    std::vector<bool> is_val{l_val, r_val};
    std::vector<ValueRef> pks(2);
    std::vector<bool> pk_has(2, false), pk_prev(2, false);
    if (!scalar) {
      for (int k = 0; k < 2; ++k) {
        if (is_val[k]) continue;
        ValueRef v;
        bool ok = false;
        if (peek_ref(k == 0 ? le : rhs, ctx, v, ok)) {
          pks[k] = v;
          pk_has[k] = true;
          pk_prev[k] = ok;
        }
      }
      close_chain_on_stale_refs(2, vals, is_val, pks, pk_has, pk_prev);
    }
    int host = -1;
    for (int k = 0; k < 2 && host < 0; ++k) {
      if (!scalar) {
        ValueRef cand;
        if (is_val[k]) cand = vals[k];
        else if (pk_has[k] && pk_prev[k]) cand = pks[k];
        else continue;
        ProtoNode& cn = node(cand.node);
        if (cand.node == chain_tail_ && cn.kind == NodeKind::Eltwise &&
            cn.width == ctx.width &&
            cand.slot == static_cast<int>(cn.ops.size()) - 1 &&
            static_cast<int>(cn.ops.size()) < opts_.fabric.stages &&
            consumers_[cand.node] == 0)
          host = cand.node;
      } else if (is_val[k] && vals[k].node == current_block_ &&
                 static_cast<int>(node(vals[k].node).ops.size()) <
                     opts_.fabric.scalar_block_max_ops) {
        host = vals[k].node;
      }
    }
    if (host < 0) host = ensure_op_host(ctx);
    ProtoOp op;
    op.code = '+';
    for (int k = 0; k < 2; ++k) {
      const Expr& ex = k == 0 ? le : rhs;
      ValueRef val = vals[k];
      if (is_val[k]) {
        if (val.node == host) {
          OperandRef pr;
          pr.src = OperandRef::Src::Prev;
          pr.edge = node(host).kind == NodeKind::ScalarBlock ? val.slot : -1;
          op.ins.push_back(pr);
        } else {
          OperandRef s;
          s.src = OperandRef::Src::Stream;
          s.edge = add_edge(host, {val.node, val.slot});
          s.ci = val.width > 1 ? 1 : 0;
          op.ins.push_back(s);
        }
      } else {
        op.ins.push_back(leaf_operand(host, ex, ctx));
      }
    }
    node(host).ops.push_back(std::move(op));
    out = {host, static_cast<int>(node(host).ops.size()) - 1, ctx.width};
    finish_op_host(host, ctx);
    return true;
  }

  // Emits one op; operands lower recursively (chained into the same node
  // when possible, or into separate nodes feeding streams).
  ValueRef emit_op(const Expr& e, char code, const std::vector<const Expr*>& args,
                   const Ctx& ctx, bool scalar) {
    (void)e;
    // Lower non-leaf operands first (they may create nodes).
    std::vector<ValueRef> vals(args.size());
    std::vector<bool> is_val(args.size(), false);
    for (size_t i = 0; i < args.size(); ++i) {
      if (!is_leaf_expr(*args[i])) {
        vals[i] = lower_vector_expr(*args[i], ctx);
        is_val[i] = true;
      }
    }

    // Leaf references to existing values join host selection; any reference
    // that cannot ride the open chain's newest row closes the chain first.
    std::vector<ValueRef> pks(args.size());
    std::vector<bool> pk_has(args.size(), false), pk_prev(args.size(), false);
    if (!scalar) {
      for (size_t i = 0; i < args.size(); ++i) {
        if (is_val[i]) continue;
        ValueRef v;
        bool ok = false;
        if (peek_ref(*args[i], ctx, v, ok)) {
          pks[i] = v;
          pk_has[i] = true;
          pk_prev[i] = ok;
        }
      }
      close_chain_on_stale_refs(args.size(), vals, is_val, pks, pk_has, pk_prev);
    }

    // Continue inside an operand's node if it is still open for chaining.
    int host = -1;
    for (size_t i = 0; i < args.size() && host < 0; ++i) {
      if (!scalar) {
        ValueRef cand;
        if (is_val[i]) cand = vals[i];
        else if (pk_has[i] && pk_prev[i]) cand = pks[i];
        else continue;
        ProtoNode& cn = node(cand.node);
        if (cand.node == chain_tail_ && cn.kind == NodeKind::Eltwise &&
            cn.width == ctx.width &&
            cand.slot == static_cast<int>(cn.ops.size()) - 1 &&
            static_cast<int>(cn.ops.size()) < opts_.fabric.stages &&
            consumers_[cand.node] == 0)
          host = cand.node;
      } else if (is_val[i] && vals[i].node == current_block_ &&
                 static_cast<int>(node(vals[i].node).ops.size()) <
                     opts_.fabric.scalar_block_max_ops) {
        host = vals[i].node;
      }
    }
    if (host < 0) host = ensure_op_host(ctx);

    ProtoOp op;
    op.code = code;
    for (size_t i = 0; i < args.size(); ++i) {
      if (is_val[i]) {
        if (host == vals[i].node) {
          OperandRef p;
          p.src = OperandRef::Src::Prev;
          p.edge = node(host).kind == NodeKind::ScalarBlock ? vals[i].slot : -1;
          op.ins.push_back(p);
        } else {
          OperandRef s;
          s.src = OperandRef::Src::Stream;
          s.edge = add_edge(host, {vals[i].node, vals[i].slot});
          s.ci = vals[i].width > 1 ? 1 : 0;
          op.ins.push_back(s);
        }
      } else {
        op.ins.push_back(leaf_operand(host, *args[i], ctx));
      }
    }
    node(host).ops.push_back(std::move(op));
    ValueRef out{host, static_cast<int>(node(host).ops.size()) - 1, ctx.width};
    finish_op_host(host, ctx);
    return out;
  }

  // An operand referencing the open chain anywhere but its newest row would
  // need a self edge if the op were appended there; close the chain instead.
  void close_chain_on_stale_refs(size_t n, const std::vector<ValueRef>& vals,
                                 const std::vector<bool>& is_val,
                                 const std::vector<ValueRef>& pks,
                                 const std::vector<bool>& pk_has,
                                 const std::vector<bool>& pk_prev) {
    if (chain_tail_ < 0) return;
    int last = static_cast<int>(node(chain_tail_).ops.size()) - 1;
    for (size_t i = 0; i < n; ++i) {
      bool touches = (is_val[i] && vals[i].node == chain_tail_) ||
                     (pk_has[i] && pks[i].node == chain_tail_);
      if (!touches) continue;
      const ValueRef& v = is_val[i] ? vals[i] : pks[i];
      if (v.slot != last || (!is_val[i] && !pk_prev[i])) {
        chain_tail_ = -1;
        return;
      }
    }
  }

  // Chooses (or creates) the node the next op lands in.
  int ensure_op_host(const Ctx& ctx) {
    bool scalar = ctx.width == 1 && ctx.iter_var.empty();
    if (scalar) {
      if (current_block_ >= 0 &&
          static_cast<int>(node(current_block_).ops.size()) <
              opts_.fabric.scalar_block_max_ops) {
        return current_block_;
      }
      ProtoNode b;
      b.kind = NodeKind::ScalarBlock;
      b.width = 1;
      current_block_ = add_node(std::move(b));
      return current_block_;
    }
    if (chain_tail_ >= 0) {
      // Unconsumed rows pack together only within one statement; ops from a
      // later statement continue a chain solely by consuming its newest row.
      ProtoNode& t = node(chain_tail_);
      if (t.kind == NodeKind::Eltwise && t.width == ctx.width &&
          t.label == cur_label_ &&
          static_cast<int>(t.ops.size()) < opts_.fabric.stages && consumers_[chain_tail_] == 0) {
        return chain_tail_;
      }
    }
    ProtoNode n;
    n.kind = NodeKind::Eltwise;
    n.width = ctx.width;
    n.jobs = (ctx.width + opts_.fabric.lanes - 1) / opts_.fabric.lanes;
    return add_node(std::move(n));
  }

  void finish_op_host(int host, const Ctx& ctx) {
    bool scalar = ctx.width == 1 && ctx.iter_var.empty();
    if (scalar) {
      current_block_ = host;
    } else if (node(host).kind == NodeKind::Eltwise) {
      chain_tail_ = host;
    }
  }

  // ---- scalar statements ----

  ValueRef lower_scalar_expr(const Expr& e) {
    Ctx ctx;
    ctx.width = 1;

    // Cross-statement fusion: a scalar chain over one fresh reduce result
    // rides along as tail ops on the finisher.
    if (ValueRef out; try_tail_chain(e, ctx, out)) return out;

    // Statements with embedded reduces or luts must not entangle with an
    // open block that they might feed from (cycle risk): close it.
    if (contains_reduce_or_lut(e)) current_block_ = -1;
    return lower_vector_expr(e, ctx);
  }

  static bool contains_reduce_or_lut(const Expr& e) {
    if (e.kind == ExprKind::ReduceExpr || is_lut_call(e)) return true;
    for (const auto& a : e.args)
      if (contains_reduce_or_lut(*a)) return true;
    if (e.body && contains_reduce_or_lut(*e.body)) return true;
    if (e.source && contains_reduce_or_lut(*e.source)) return true;
    return false;
  }

  bool try_tail_chain(const Expr& e, const Ctx& ctx, ValueRef& out) {
    // Collect a chain of simple scalar ops ending at a VarRef of a fresh
    // reduce finisher. Each op continues through its single computed
    // operand, or through a VarRef when all operands are leaves.
    std::vector<const Expr*> chain;
    const Expr* cur = &e;
    while (cur->kind != ExprKind::VarRef) {
      if (is_lut_call(*cur)) return false;
      if (cur->kind != ExprKind::Binary && cur->kind != ExprKind::Call) return false;
      const Expr* next = nullptr;
      int computed = 0;
      for (const auto& a : cur->args) {
        if (!is_leaf_expr(*a)) {
          ++computed;
          next = a.get();
        }
      }
      if (computed > 1) return false;
      if (computed == 0) {
        for (const auto& a : cur->args) {
          if (a->kind == ExprKind::VarRef) {
            next = a.get();
            break;
          }
        }
      }
      if (!next) return false;
      chain.push_back(cur);
      cur = next;
      if (static_cast<int>(chain.size()) > opts_.fabric.max_tail_ops) return false;
    }
    auto it = values_.find(cur->name);
    if (it == values_.end()) return false;
    ValueRef fin = it->second;
    if (fin.width != 1) return false;
    const ProtoNode& n = mod_.nodes[fin.node];
    if (n.kind != NodeKind::MapReduce && n.kind != NodeKind::Combine) return false;
    if (!is_fresh_finisher(fin.node)) return false;
    if (fin.slot != static_cast<int>(n.tails.size())) return false;
    if (tail_budget(fin.node) < static_cast<int>(chain.size())) return false;
    // No other operand may read the finisher we are mutating.
    for (const Expr* op : chain) {
      for (const auto& a : op->args) {
        if (a.get() == cur || a->kind != ExprKind::VarRef) continue;
        auto o = values_.find(a->name);
        if (o != values_.end() && o->second.node == fin.node) return false;
      }
    }

    // chain is root-first; emit deepest-first. chain[k + 1] (or the VarRef
    // terminal) is the operand the running value substitutes.
    for (int k = static_cast<int>(chain.size()) - 1; k >= 0; --k) {
      const Expr& op = *chain[k];
      const Expr* descended =
          k + 1 < static_cast<int>(chain.size()) ? chain[k + 1] : cur;
      ProtoOp t;
      t.code = op_code_of(op);
      bool used_prev = false;
      for (const auto& a : op.args) {
        if (!used_prev && a.get() == descended) {
          OperandRef p;
          p.src = OperandRef::Src::Prev;
          t.ins.push_back(p);
          used_prev = true;
        } else {
          t.ins.push_back(leaf_operand(fin.node, *a, ctx));
        }
      }
      if (!used_prev) return false;  // defensive; chain construction forbids it
      node(fin.node).tails.push_back(std::move(t));
    }
    fin.slot = static_cast<int>(node(fin.node).tails.size());
    out = fin;
    return true;
  }

  // ---- cleanup ----

  void prune() {
    std::vector<bool> alive(mod_.nodes.size(), false);
    std::vector<int> stack;
    for (const auto& n : mod_.nodes) {
      if (n.kind == NodeKind::Output) {
        alive[n.id] = true;
        stack.push_back(n.id);
      }
    }
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      for (const auto& in : mod_.nodes[id].inputs) {
        if (!alive[in.node]) {
          alive[in.node] = true;
          stack.push_back(in.node);
        }
      }
    }
    // Inputs always stay (they are part of the interface).
    for (auto& n : mod_.nodes)
      if (n.kind == NodeKind::Input) alive[n.id] = true;

    std::vector<int> remap(mod_.nodes.size(), -1);
    std::vector<ProtoNode> kept;
    for (auto& n : mod_.nodes) {
      if (!alive[n.id]) continue;
      remap[n.id] = static_cast<int>(kept.size());
      kept.push_back(std::move(n));
    }
    for (auto& n : kept) {
      n.id = remap[n.id];
      for (auto& in : n.inputs) in.node = remap[in.node];
      if (n.buffered_consumer >= 0) n.buffered_consumer = remap[n.buffered_consumer];
    }
    mod_.nodes = std::move(kept);
  }
};

}  // namespace detail

// ==========================================================================
// unroll, memory assignment, placement
// ==========================================================================

namespace detail {

inline int unroll_of(const Module& m, const ProtoNode& n) {
  auto it = m.opts.unroll.find(n.label);
  int u = it != m.opts.unroll.end() ? it->second : m.opts.default_unroll;
  if (u <= 0) u = n.jobs;
  return std::max(1, std::min(u, n.jobs));
}

inline void unroll(Module& m) {
  for (auto& n : m.nodes) {
    if (n.is_cu()) n.instances = unroll_of(m, n);
  }
  // Buffer memories are private per consuming instance.
  for (auto& n : m.nodes) {
    if (n.kind == NodeKind::BufferMu) n.instances = m.nodes[n.buffered_consumer].instances;
  }
}

// Per-cycle element read width of a weight operand.
inline int weight_read_width(const Module& m, const ProtoNode& n, const OperandRef& r) {
  if (r.cj == 0) return 1;
  int w = n.kind == NodeKind::MapReduce ? n.reduce_width : n.width;
  return std::min(m.fabric.lanes, w);
}

struct WeightUse {
  int node = -1;
  int weight = -1;
  int read_width = 1;
  bool sliced = false;  // instances read disjoint slices (iter-dependent)
};

inline void collect_weight_uses(const Module& m, std::vector<WeightUse>& uses) {
  auto scan = [&](const ProtoNode& n, const std::vector<ProtoOp>& ops) {
    for (const auto& op : ops) {
      for (const auto& in : op.ins) {
        if (in.src != OperandRef::Src::Weight) continue;
        bool found = false;
        for (auto& u : uses) {
          if (u.node == n.id && u.weight == in.weight) {
            u.read_width = std::max(u.read_width, weight_read_width(m, n, in));
            u.sliced = u.sliced || in.ci != 0;
            found = true;
          }
        }
        if (!found) {
          uses.push_back({n.id, in.weight, weight_read_width(m, n, in), in.ci != 0});
        }
      }
    }
  };
  for (const auto& n : m.nodes) {
    scan(n, n.lane_ops);
    scan(n, n.tails);
    scan(n, n.ops);
  }
}

inline void assign_memories(Module& m) {
  const FabricConfig& fb = m.fabric;
  const int read_budget = 2 * fb.mu_banks;

  // Buffer memories first: one per consuming instance.
  for (const auto& n : m.nodes) {
    if (n.kind != NodeKind::BufferMu) continue;
    for (int inst = 0; inst < n.instances; ++inst) {
      MuUnit mu;
      mu.id = static_cast<int>(m.mus.size());
      mu.is_buffer = true;
      mu.buffer_node = n.id;
      mu.buffer_instance = inst;
      mu.words = n.width;
      mu.reads = std::min(fb.lanes, m.nodes[n.buffered_consumer].kind == NodeKind::MapReduce
                                        ? m.nodes[n.buffered_consumer].reduce_width
                                        : m.nodes[n.buffered_consumer].width);
      mu.consumers.push_back({n.buffered_consumer, inst});
      m.mus.push_back(std::move(mu));
    }
  }

  std::vector<WeightUse> uses;
  collect_weight_uses(m, uses);
  for (const auto& u : uses) {
    const ProtoNode& n = m.nodes[u.node];
    const TensorDecl& d = m.decls[u.weight];
    int group = std::max(1, std::min(fb.mu_max_consumers, read_budget / u.read_width));
    for (int base = 0; base < n.instances; base += group) {
      int size = std::min(group, n.instances - base);
      int64_t words =
          u.sliced ? (d.words() * size + n.instances - 1) / n.instances : d.words();
      int reads = u.read_width * size;
      std::vector<std::pair<int, int>> cons;
      for (int i = 0; i < size; ++i) cons.push_back({u.node, base + i});

      // First fit into an existing unit (a private buffer of the same single
      // instance is the preferred host, e.g. a kernel beside its window).
      MuUnit* host = nullptr;
      if (size == 1) {
        for (auto& mu : m.mus) {
          if (mu.is_buffer && mu.consumers.size() == 1 && mu.consumers[0] == cons[0]) {
            if (mu.words + words <= fb.mu_capacity && mu.reads + reads <= read_budget) {
              host = &mu;
              break;
            }
          }
        }
      }
      if (!host) {
        for (auto& mu : m.mus) {
          if (mu.is_buffer) continue;
          std::set<std::pair<int, int>> uni(mu.consumers.begin(), mu.consumers.end());
          for (const auto& c : cons) uni.insert(c);
          if (static_cast<int>(uni.size()) > fb.mu_max_consumers) continue;
          if (mu.words + words > fb.mu_capacity) continue;
          if (mu.reads + reads > read_budget) continue;
          host = &mu;
          break;
        }
      }
      if (!host) {
        MuUnit mu;
        mu.id = static_cast<int>(m.mus.size());
        m.mus.push_back(std::move(mu));
        host = &m.mus.back();
      }
      host->shards.push_back({d.name, words, reads});
      host->words += words;
      host->reads += reads;
      for (const auto& c : cons) {
        if (std::find(host->consumers.begin(), host->consumers.end(), c) ==
            host->consumers.end())
          host->consumers.push_back(c);
      }
    }
  }
}

inline void place(Module& m) {
  const FabricConfig& fb = m.fabric;
  std::vector<Coord> slots = cu_slot_order(fb);
  size_t next = 0;
  for (auto& n : m.nodes) {
    if (n.kind == NodeKind::Input || n.kind == NodeKind::Output) {
      n.cells.assign(1, port_coord());
      continue;
    }
    if (!n.is_cu()) continue;
    for (int i = 0; i < n.instances; ++i) {
      if (next >= slots.size()) {
        throw CompileError("fabric too small: " + std::to_string(slots.size()) +
                           " compute cells available");
      }
      n.cells.push_back(slots[next++]);
    }
  }

  // Memory units: greedy nearest free memory cell to the consumer set.
  std::vector<Coord> mu_cells = mu_cell_order(fb);
  std::vector<bool> taken(mu_cells.size(), false);
  auto cell_of = [&](int node, int inst) { return m.nodes[node].cells.at(inst); };
  for (auto& mu : m.mus) {
    int best = -1;
    long best_cost = 0;
    for (size_t i = 0; i < mu_cells.size(); ++i) {
      if (taken[i]) continue;
      long cost = 0;
      for (const auto& [cn, ci] : mu.consumers) cost += manhattan(mu_cells[i], cell_of(cn, ci));
      if (best < 0 || cost < best_cost) {
        best = static_cast<int>(i);
        best_cost = cost;
      }
    }
    if (best < 0) throw CompileError("fabric too small: no free memory cell");
    taken[best] = true;
    mu.cell = mu_cells[best];
  }
  // Buffer nodes inherit their unit cells for routing.
  for (auto& n : m.nodes) {
    if (n.kind != NodeKind::BufferMu) continue;
    n.cells.assign(n.instances, Coord{});
    for (const auto& mu : m.mus) {
      if (mu.is_buffer && mu.buffer_node == n.id) n.cells[mu.buffer_instance] = mu.cell;
    }
  }
}

// ==========================================================================
// estimate
// ==========================================================================

// Scalar stream count an edge contributes to its consumer's gather stage.
inline int edge_scalar_streams(const Module& m, const ProtoNode& dst, int edge_idx) {
  const NodeInput& in = dst.inputs[edge_idx];
  const ProtoNode& src = m.nodes[in.node];
  bool partial = src.emits_partials && dst.kind == NodeKind::Combine &&
                 edge_idx < dst.n_partial_edges;
  if (partial) return src.instances;
  switch (src.kind) {
    case NodeKind::Input:
      if (src.scalars) {
        // Count the elements actually read over this edge.
        bool varying = false;
        std::set<long> taps;
        auto scan = [&](const std::vector<ProtoOp>& ops) {
          for (const auto& op : ops)
            for (const auto& r : op.ins) {
              if (r.src != OperandRef::Src::Stream || r.edge < 0) continue;
              if (dst.inputs[r.edge] == in) {
                if (r.ci != 0 || r.cj != 0) varying = true;
                else taps.insert(r.c0);
              }
            }
        };
        scan(dst.lane_ops);
        scan(dst.tails);
        scan(dst.ops);
        return varying ? src.width : static_cast<int>(taps.size());
      }
      return src.width == 1 ? 1 : 0;
    case NodeKind::MapReduce:
    case NodeKind::Combine:
    case NodeKind::ScalarBlock:
      return src.instances;
    case NodeKind::Eltwise:
    case NodeKind::Lut:
      return src.width == 1 ? 1 : 0;
    default:
      return 0;  // buffers and port nodes stream vectors
  }
}

inline int gather_cycles(const Module& m, const ProtoNode& n) {
  int k = 0;
  for (size_t i = 0; i < n.inputs.size(); ++i) k += edge_scalar_streams(m, n, static_cast<int>(i));
  return k >= 2 ? (k + 1) / 2 : 0;
}

inline int compute_cycles(const Module& m, const ProtoNode& n) {
  switch (n.kind) {
    case NodeKind::MapReduce: {
      int rows = 0;
      for (const auto& op : n.lane_ops)
        if (op.code != '=') ++rows;
      int c = rows + m.fabric.reduce_tree_cycles();
      if (!n.emits_partials) c += static_cast<int>(n.tails.size());
      return c;
    }
    case NodeKind::Combine:
      return 1 + (n.rop == ReduceOp::Add ? 1 : 0) + static_cast<int>(n.tails.size());
    case NodeKind::Eltwise:
    case NodeKind::ScalarBlock:
      return static_cast<int>(n.ops.size());
    case NodeKind::Lut:
      return 5;
    case NodeKind::BufferMu:
      return 1;
    default:
      return 0;
  }
}

inline int jobs_per_instance(const ProtoNode& n) {
  return (n.jobs + n.instances - 1) / std::max(1, n.instances);
}

inline double node_traversal(const Module& m, const ProtoNode& n) {
  double t = gather_cycles(m, n) + compute_cycles(m, n);
  if (n.is_cu()) t += jobs_per_instance(n) - 1;
  return t;
}

inline double edge_hops(const Module& m, const ProtoNode& dst, const NodeInput& in) {
  const ProtoNode& src = m.nodes[in.node];
  // A staging buffer is private to its consumer: instances pair up.
  if (src.kind == NodeKind::BufferMu && src.buffered_consumer == dst.id &&
      src.cells.size() == dst.cells.size()) {
    int worst = 0;
    for (size_t i = 0; i < src.cells.size(); ++i)
      worst = std::max(worst, manhattan(src.cells[i], dst.cells[i]));
    return worst;
  }
  int worst = 0;
  for (const auto& a : src.cells)
    for (const auto& b : dst.cells) worst = std::max(worst, manhattan(a, b));
  return worst;
}

// Deterministic topological order (lowest id first among ready nodes).
inline std::vector<int> topo_order(const Module& m) {
  size_t n = m.nodes.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> outs(n);
  for (const auto& nd : m.nodes) {
    std::set<int> seen;
    for (const auto& in : nd.inputs) {
      if (seen.insert(in.node).second) {
        ++indeg[nd.id];
        outs[in.node].push_back(nd.id);
      }
    }
  }
  std::set<int> ready;
  for (size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.insert(static_cast<int>(i));
  std::vector<int> order;
  while (!ready.empty()) {
    int id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (int d : outs[id])
      if (--indeg[d] == 0) ready.insert(d);
  }
  if (order.size() != n) throw CompileError("mapping graph has a cycle");
  return order;
}

inline void estimate(Module& m) {
  const FabricConfig& fb = m.fabric;
  PerfReport& p = m.perf;
  p.program = m.name;

  // Initiation interval and node counts.
  int ii = 1, cus = 0;
  for (const auto& n : m.nodes) {
    if (!n.is_cu()) continue;
    cus += n.instances;
    ii = std::max(ii, jobs_per_instance(n));
  }
  p.ii = ii;
  p.rate_gpps = fb.clock_ghz / ii;
  p.cus = cus;
  p.mus = static_cast<int>(m.mus.size());

  // Links: one per input stream, one per memory unit output, one per compute
  // instance output.
  int links = 0;
  std::vector<bool> has_consumer(m.nodes.size(), false);
  for (const auto& n : m.nodes)
    for (const auto& in : n.inputs) has_consumer[in.node] = true;
  for (const auto& n : m.nodes) {
    if (n.kind == NodeKind::Input) ++links;
    else if (n.is_cu() && has_consumer[n.id]) links += n.instances;
  }
  links += static_cast<int>(m.mus.size());
  p.links = links;

  p.area_mm2 = cus * fb.cu_area_mm2() + m.mus.size() * fb.mu_area_mm2 + links * fb.link_area_mm2;
  p.power_mw = p.area_mm2 * fb.power_density();
  p.area_overhead_pct = 100.0 * p.area_mm2 / kPipelineAreaBudgetMm2;
  p.power_overhead_pct = 100.0 * p.power_mw / kPipelinePowerBudgetMw;

  // Latency: longest path over the mapping graph.
  std::vector<double> done(m.nodes.size(), 0.0);
  double total = 0.0;
  for (int id : topo_order(m)) {
    const ProtoNode& n = m.nodes[id];
    double start = 0.0;
    for (const auto& in : n.inputs) {
      double t = done[in.node] + fb.movement_cycles * edge_hops(m, n, in);
      start = std::max(start, t);
    }
    done[n.id] = start + node_traversal(m, n);
    if (n.kind == NodeKind::Output) total = std::max(total, done[n.id]);
  }
  p.latency_cycles = total;
  p.latency_ns = total / fb.clock_ghz;
}

}  // namespace detail

// ==========================================================================
// driver
// ==========================================================================

inline Module compile(const Program& prog, const CompileOptions& opts) {
  opts.fabric.check();
  detail::Lowerer low(prog, opts);
  Module m = low.run();
  detail::unroll(m);
  detail::assign_memories(m);
  detail::place(m);
  detail::estimate(m);
  return m;
}

// Human and machine readable mapping dump.
inline std::string mapping_to_text(const Module& m) {
  std::ostringstream os;
  os << "#mrdp-mapping v1\n";
  os << "program = " << m.name << "\n";
  os << "precision = " << format_name(m.fmt) << "\n";
  os << "grid = " << m.fabric.rows << "x" << m.fabric.cols << "\n";
  for (const auto& n : m.nodes) {
    os << "node " << n.id << " " << node_kind_name(n.kind) << " label=" << n.label
       << " width=" << n.width << " jobs=" << n.jobs << " instances=" << n.instances;
    if (n.kind == NodeKind::MapReduce) {
      os << " reduce_width=" << n.reduce_width << (n.mac ? " mac" : "")
         << " tails=" << n.tails.size() << (n.emits_partials ? " partials" : "");
    }
    if (!n.tensor.empty()) os << " tensor=" << n.tensor;
    if (!n.cells.empty()) {
      os << " cells=";
      for (size_t i = 0; i < n.cells.size(); ++i) {
        if (i) os << ";";
        os << n.cells[i].row << "," << n.cells[i].col;
      }
    }
    if (!n.inputs.empty()) {
      os << " from=";
      for (size_t i = 0; i < n.inputs.size(); ++i) {
        if (i) os << ";";
        os << n.inputs[i].node;
        if (n.inputs[i].slot) os << "." << n.inputs[i].slot;
      }
    }
    os << "\n";
  }
  for (const auto& mu : m.mus) {
    os << "mu " << mu.id << " cell=" << mu.cell.row << "," << mu.cell.col
       << " words=" << mu.words << " reads=" << mu.reads
       << (mu.is_buffer ? " buffer" : "");
    if (!mu.shards.empty()) {
      os << " holds=";
      for (size_t i = 0; i < mu.shards.size(); ++i) {
        if (i) os << ";";
        os << mu.shards[i].tensor;
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace mrdp

// mrdp - map-reduce data plane model - functional execution of a mapping
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mrdp/compiler.hpp"
#include "mrdp/fixpoint.hpp"

namespace mrdp {

// Evaluates a compiled mapping on raw fixed-point tensors. Instance splits
// only affect timing, so evaluation walks proto nodes; arithmetic goes
// through the same fx_ kernels as the reference interpreter, keeping the two
// bit-exact by construction.
class Executor {
 public:
  Executor(const Module& m, const LutSet& luts) : m_(m), luts_(&luts) {}

  void set_tensor(const std::string& name, std::vector<int64_t> raw) {
    bound_[name] = std::move(raw);
  }

  std::map<std::string, std::vector<int64_t>> run() {
    vals_.assign(m_.nodes.size(), {});
    partials_.assign(m_.nodes.size(), {});
    std::map<std::string, std::vector<int64_t>> out;
    for (int id : detail::topo_order(m_)) {
      const ProtoNode& n = m_.nodes[id];
      switch (n.kind) {
        case NodeKind::Input: eval_input(n); break;
        case NodeKind::Output: {
          const NodeInput& in = n.inputs.at(0);
          const auto& v = vals_[in.node].at(in.slot);
          if (static_cast<int>(v.size()) != n.width)
            throw Error("output width mismatch for '" + n.tensor + "'");
          out[n.tensor] = v;
          break;
        }
        case NodeKind::MapReduce: eval_map_reduce(n); break;
        case NodeKind::Combine: eval_combine(n); break;
        case NodeKind::Eltwise: eval_eltwise(n); break;
        case NodeKind::ScalarBlock: eval_block(n); break;
        case NodeKind::Lut: eval_lut(n); break;
        case NodeKind::BufferMu: {
          const NodeInput& in = n.inputs.at(0);
          vals_[n.id] = {vals_[in.node].at(in.slot)};
          break;
        }
      }
    }
    return out;
  }

 private:
  const Module& m_;
  const LutSet* luts_;
  std::map<std::string, std::vector<int64_t>> bound_;
  std::vector<std::vector<std::vector<int64_t>>> vals_;  // node -> slot -> items
  std::vector<std::vector<i128>> partials_;              // node -> item*chunks+c

  int chunks_of(const ProtoNode& n) const {
    return (n.reduce_width + m_.fabric.lanes - 1) / m_.fabric.lanes;
  }

  int64_t resolve(const ProtoNode& n, const OperandRef& r, long iter, long lane,
                  int64_t prev) const {
    switch (r.src) {
      case OperandRef::Src::Imm:
        return r.imm;
      case OperandRef::Src::Prev:
        if (n.kind == NodeKind::ScalarBlock && r.edge >= 0)
          return vals_[n.id].at(r.edge).at(0);
        return prev;
      case OperandRef::Src::Stream: {
        const NodeInput& in = n.inputs.at(r.edge);
        long elem = r.c0 + r.ci * iter + r.cj * lane;
        return vals_[in.node].at(in.slot).at(elem);
      }
      case OperandRef::Src::Weight: {
        const TensorDecl& d = m_.decls.at(r.weight);
        long elem = r.c0 + r.ci * iter + r.cj * lane;
        auto it = bound_.find(d.name);
        if (it == bound_.end()) throw Error("weights '" + d.name + "' not bound");
        return it->second.at(elem);
      }
    }
    return 0;
  }

  int64_t apply(const ProtoOp& op, const std::vector<int64_t>& v) const {
    const FixedFormat& f = m_.fmt;
    switch (op.code) {
      case '=': return v.at(0);
      case '+': return fx_add(v.at(0), v.at(1), f);
      case '-': return fx_sub(v.at(0), v.at(1), f);
      case '*': return fx_mul(v.at(0), v.at(1), f);
      case '<': return fx_cmp_lt(v.at(0), v.at(1), f);
      case 'g': return fx_cmp_ge(v.at(0), v.at(1), f);
      case 'x': return fx_max(v.at(0), v.at(1));
      case 'n': return fx_min(v.at(0), v.at(1));
      case 's': return fx_select(v.at(0), v.at(1), v.at(2));
      case 'r': return fx_relu(v.at(0));
      case 'l': return fx_leaky_relu(v.at(0), f);
      case 'L': return luts_->by_name(op.lut).eval(v.at(0));
    }
    throw Error(std::string("bad op code '") + op.code + "'");
  }

  std::vector<int64_t> resolve_all(const ProtoNode& n, const ProtoOp& op, long iter,
                                   long lane, int64_t prev) const {
    std::vector<int64_t> v;
    v.reserve(op.ins.size());
    for (const auto& r : op.ins) v.push_back(resolve(n, r, iter, lane, prev));
    return v;
  }

  void eval_input(const ProtoNode& n) {
    auto it = bound_.find(n.tensor);
    if (it == bound_.end()) throw Error("input '" + n.tensor + "' not bound");
    if (static_cast<int>(it->second.size()) != n.width)
      throw Error("input '" + n.tensor + "' has wrong length");
    vals_[n.id] = {it->second};
  }

  // Runs the lane chain for element j of item i. For a MAC the root multiply
  // feeds the wide accumulator; otherwise the rounded value is returned.
  void lane_accumulate(const ProtoNode& n, ReduceAccum& acc, long i, long j) const {
    int64_t prev = 0;
    size_t last = n.lane_ops.size() - 1;
    for (size_t k = 0; k < n.lane_ops.size(); ++k) {
      const ProtoOp& op = n.lane_ops[k];
      std::vector<int64_t> v = resolve_all(n, op, i, j, prev);
      if (n.mac && k == last) {
        acc.add_product(v.at(0), v.at(1));
        return;
      }
      prev = apply(op, v);
    }
    acc.add_value(prev, m_.fmt);
  }

  int64_t lane_value(const ProtoNode& n, long i, long j) const {
    int64_t prev = 0;
    for (const auto& op : n.lane_ops) prev = apply(op, resolve_all(n, op, i, j, prev));
    return prev;
  }

  // Finisher slots stay addressable: slot 0 holds the reduce result, slot
  // k the value after tail k.
  void store_finish(const ProtoNode& n, int64_t v, long item) {
    vals_[n.id][0][item] = v;
    for (size_t k = 0; k < n.tails.size(); ++k) {
      v = apply(n.tails[k], resolve_all(n, n.tails[k], item, 0, v));
      vals_[n.id][k + 1][item] = v;
    }
  }

  void eval_map_reduce(const ProtoNode& n) {
    const FixedFormat& f = m_.fmt;
    int chunks = chunks_of(n);
    if (n.emits_partials) {
      partials_[n.id].assign(static_cast<size_t>(n.width) * chunks, 0);
    } else {
      vals_[n.id].assign(1 + n.tails.size(), std::vector<int64_t>(n.width, 0));
    }
    for (long i = 0; i < n.width; ++i) {
      if (!n.emits_partials) {
        int64_t out;
        if (n.rop == ReduceOp::Add) {
          ReduceAccum acc;
          for (long j = 0; j < n.reduce_width; ++j) lane_accumulate(n, acc, i, j);
          out = acc.finish(f);
        } else {
          out = n.rop == ReduceOp::Max ? f.min_raw() : f.max_raw();
          for (long j = 0; j < n.reduce_width; ++j) {
            int64_t v = lane_value(n, i, j);
            out = n.rop == ReduceOp::Max ? fx_max(out, v) : fx_min(out, v);
          }
        }
        store_finish(n, out, i);
        continue;
      }
      for (int c = 0; c < chunks; ++c) {
        long lo = static_cast<long>(c) * m_.fabric.lanes;
        long hi = std::min<long>(n.reduce_width, lo + m_.fabric.lanes);
        if (n.rop == ReduceOp::Add) {
          ReduceAccum acc;
          for (long j = lo; j < hi; ++j) lane_accumulate(n, acc, i, j);
          partials_[n.id][i * chunks + c] = acc.acc;
        } else {
          int64_t best = n.rop == ReduceOp::Max ? f.min_raw() : f.max_raw();
          for (long j = lo; j < hi; ++j) {
            int64_t v = lane_value(n, i, j);
            best = n.rop == ReduceOp::Max ? fx_max(best, v) : fx_min(best, v);
          }
          partials_[n.id][i * chunks + c] = best;
        }
      }
    }
  }

  // Per partial edge the chunk sums stay wide and finish once; results from
  // distinct edges then combine with ordinary rounded ops, matching the
  // reference evaluation of adjacent reduce expressions.
  void eval_combine(const ProtoNode& n) {
    const FixedFormat& f = m_.fmt;
    vals_[n.id].assign(1 + n.tails.size(), std::vector<int64_t>(n.width, 0));
    for (long i = 0; i < n.width; ++i) {
      int64_t out = 0;
      for (int e = 0; e < n.n_partial_edges; ++e) {
        const NodeInput& in = n.inputs.at(e);
        const ProtoNode& src = m_.nodes[in.node];
        int chunks = chunks_of(src);
        int64_t v;
        if (n.rop == ReduceOp::Add) {
          ReduceAccum acc;
          for (int c = 0; c < chunks; ++c)
            acc.acc += partials_[src.id].at(i * chunks + c);
          v = acc.finish(f);
        } else {
          v = n.rop == ReduceOp::Max ? f.min_raw() : f.max_raw();
          for (int c = 0; c < chunks; ++c) {
            int64_t p = static_cast<int64_t>(partials_[src.id].at(i * chunks + c));
            v = n.rop == ReduceOp::Max ? fx_max(v, p) : fx_min(v, p);
          }
        }
        if (e == 0) {
          out = v;
        } else {
          out = n.rop == ReduceOp::Add
                    ? fx_add(out, v, f)
                    : (n.rop == ReduceOp::Max ? fx_max(out, v) : fx_min(out, v));
        }
      }
      store_finish(n, out, i);
    }
  }

  void eval_eltwise(const ProtoNode& n) {
    // Every stage result is tappable: one slot per op row.
    vals_[n.id].assign(n.ops.size(), std::vector<int64_t>(n.width, 0));
    for (long i = 0; i < n.width; ++i) {
      int64_t prev = 0;
      for (size_t k = 0; k < n.ops.size(); ++k) {
        prev = apply(n.ops[k], resolve_all(n, n.ops[k], i, 0, prev));
        vals_[n.id][k][i] = prev;
      }
    }
  }

  void eval_block(const ProtoNode& n) {
    vals_[n.id].assign(n.ops.size(), std::vector<int64_t>(1, 0));
    for (size_t k = 0; k < n.ops.size(); ++k) {
      const ProtoOp& op = n.ops[k];
      vals_[n.id][k][0] = apply(op, resolve_all(n, op, 0, 0, 0));
    }
  }

  void eval_lut(const ProtoNode& n) {
    vals_[n.id] = {std::vector<int64_t>(n.width, 0)};
    const ProtoOp& op = n.ops.at(0);
    for (long i = 0; i < n.width; ++i) {
      int64_t x = resolve(n, op.ins.at(0), i, 0, 0);
      vals_[n.id][0][i] = luts_->by_name(op.lut).eval(x);
    }
  }
};

inline std::map<std::string, std::vector<int64_t>> execute(
    const Module& m, const std::map<std::string, std::vector<int64_t>>& tensors,
    const LutSet& luts) {
  Executor ex(m, luts);
  for (const auto& [name, raw] : tensors) ex.set_tensor(name, raw);
  return ex.run();
}

}  // namespace mrdp

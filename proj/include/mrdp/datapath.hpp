// mrdp - map-reduce data plane model - per-packet pipeline simulation
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <list>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrdp/common.hpp"
#include "mrdp/compiler.hpp"
#include "mrdp/execute.hpp"
#include "mrdp/fixpoint.hpp"

namespace mrdp {

// ==========================================================================
// packets and header vectors
// ==========================================================================

inline const std::vector<std::string>& five_tuple_fields() {
  static const std::vector<std::string> k = {"src_ip", "dst_ip", "src_port",
                                             "dst_port", "proto"};
  return k;
}

// One packet of a trace. Header fields are an ordered name -> integer map;
// the five-tuple entries are mandatory, everything else is optional.
struct PacketRecord {
  int64_t arrival_ns = 0;
  std::vector<std::pair<std::string, uint64_t>> fields;
  long payload_len = 0;

  bool has(const std::string& name) const {
    for (const auto& [k, v] : fields)
      if (k == name) return true;
    return false;
  }

  uint64_t get(const std::string& name, uint64_t fallback = 0) const {
    for (const auto& [k, v] : fields)
      if (k == name) return v;
    return fallback;
  }

  void set(const std::string& name, uint64_t v) {
    for (auto& [k, old] : fields)
      if (k == name) {
        old = v;
        return;
      }
    fields.emplace_back(name, v);
  }
};

// Flow identity is a hash of the five-tuple values, in canonical order.
inline uint64_t flow_id(const PacketRecord& p) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& name : five_tuple_fields()) {
    uint64_t v = p.get(name);
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

// Fixed container layout shared by every packet of a pipeline. The five
// tuple always occupies the first five slots; extras follow in declaration
// order. feature_slots names the sub-vector handed to the fabric.
struct PhvLayout {
  std::vector<std::string> containers;
  std::vector<int> feature_slots;

  int slot(const std::string& name) const {
    for (size_t i = 0; i < containers.size(); ++i)
      if (containers[i] == name) return static_cast<int>(i);
    return -1;
  }

  static PhvLayout make(const std::vector<std::string>& extras,
                        const std::vector<std::string>& features) {
    PhvLayout l;
    l.containers = five_tuple_fields();
    for (const auto& e : extras) {
      if (l.slot(e) >= 0) throw Error("duplicate phv container: " + e);
      l.containers.push_back(e);
    }
    for (const auto& f : features) {
      int s = l.slot(f);
      if (s < 0) throw Error("feature field not in layout: " + f);
      l.feature_slots.push_back(s);
    }
    return l;
  }
};

// Packet header vector: one integer container per layout slot. Feature
// containers hold fixed-point raw words once the match-action stage has
// rewritten them.
struct Phv {
  std::vector<int64_t> slots;
};

inline Phv parse(const PacketRecord& p, const PhvLayout& layout) {
  for (const auto& name : five_tuple_fields())
    if (!p.has(name)) throw Error("parse: missing mandatory field " + name);
  Phv phv;
  phv.slots.assign(layout.containers.size(), 0);
  for (size_t i = 0; i < layout.containers.size(); ++i)
    phv.slots[i] = static_cast<int64_t>(p.get(layout.containers[i], 0));
  return phv;
}

inline std::vector<int64_t> feature_slice(const PhvLayout& layout, const Phv& phv) {
  std::vector<int64_t> out;
  out.reserve(layout.feature_slots.size());
  for (int s : layout.feature_slots) out.push_back(phv.slots.at(s));
  return out;
}

inline std::vector<int64_t> bypass_slice(const PhvLayout& layout, const Phv& phv) {
  std::vector<int64_t> out;
  for (size_t i = 0; i < phv.slots.size(); ++i) {
    bool feat = false;
    for (int s : layout.feature_slots) feat |= (s == static_cast<int>(i));
    if (!feat) out.push_back(phv.slots[i]);
  }
  return out;
}

// ==========================================================================
// match-action tables
// ==========================================================================

enum class MatchKind { Exact, Ternary, Range };

// The action vocabulary covers the feature conversions the pipeline needs:
// constant set, per-value table lookup, add/shift arithmetic, and a floor
// log2 (the usual trick for compressing exponentially distributed headers).
struct MatAction {
  enum class Op { None, Set, Lookup, Add, Shift, Log2 };
  Op op = Op::None;
  std::string dst;          // container written (empty for None)
  std::string src;          // container read; defaults to dst
  int64_t operand = 0;      // Set value, Add amount, Shift count (< 0 shifts right)
  std::vector<int64_t> lut; // Lookup values, index clamped to the table
};

// Per-kind pattern encoding: Exact uses a only; Ternary matches
// (value & b) == (a & b); Range matches a <= value <= b.
struct MatEntry {
  std::vector<uint64_t> a;
  std::vector<uint64_t> b;
  MatAction action;
};

struct MatTable {
  MatchKind kind = MatchKind::Exact;
  std::vector<std::string> keys;
  std::vector<MatEntry> entries;  // priority order: first match fires
  MatAction default_action;       // identity unless configured
};

namespace detail {

inline int64_t ilog2_floor(int64_t v) {
  if (v <= 0) return 0;
  return std::bit_width(static_cast<uint64_t>(v)) - 1;
}

inline bool mat_entry_matches(const MatTable& t, const MatEntry& e,
                              const std::vector<uint64_t>& key) {
  for (size_t i = 0; i < key.size(); ++i) {
    switch (t.kind) {
      case MatchKind::Exact:
        if (key[i] != e.a.at(i)) return false;
        break;
      case MatchKind::Ternary:
        if ((key[i] & e.b.at(i)) != (e.a.at(i) & e.b.at(i))) return false;
        break;
      case MatchKind::Range:
        if (key[i] < e.a.at(i) || key[i] > e.b.at(i)) return false;
        break;
    }
  }
  return true;
}

inline void mat_act(const MatAction& act, const PhvLayout& layout, Phv& phv) {
  if (act.op == MatAction::Op::None) return;
  int dst = layout.slot(act.dst);
  if (dst < 0) throw Error("mat action writes unknown container: " + act.dst);
  int src = act.src.empty() ? dst : layout.slot(act.src);
  if (src < 0) throw Error("mat action reads unknown container: " + act.src);
  int64_t v = phv.slots[src];
  switch (act.op) {
    case MatAction::Op::Set: v = act.operand; break;
    case MatAction::Op::Lookup: {
      if (act.lut.empty()) throw Error("mat lookup action has no table");
      int64_t idx = std::clamp<int64_t>(v, 0, static_cast<int64_t>(act.lut.size()) - 1);
      v = act.lut[static_cast<size_t>(idx)];
      break;
    }
    case MatAction::Op::Add: v += act.operand; break;
    case MatAction::Op::Shift:
      v = act.operand >= 0 ? (v << act.operand) : (v >> -act.operand);
      break;
    case MatAction::Op::Log2: v = ilog2_floor(v); break;
    case MatAction::Op::None: break;
  }
  phv.slots[dst] = v;
}

}  // namespace detail

// Exactly one action fires: the first matching entry's, else the default.
inline Phv mat_apply(const MatTable& t, const PhvLayout& layout, Phv phv) {
  std::vector<uint64_t> key;
  key.reserve(t.keys.size());
  for (const auto& k : t.keys) {
    int s = layout.slot(k);
    if (s < 0) throw Error("mat key not in phv layout: " + k);
    key.push_back(static_cast<uint64_t>(phv.slots[s]));
  }
  for (const auto& e : t.entries) {
    if (detail::mat_entry_matches(t, e, key)) {
      detail::mat_act(e.action, layout, phv);
      return phv;
    }
  }
  detail::mat_act(t.default_action, layout, phv);
  return phv;
}

// ==========================================================================
// inference
// ==========================================================================

// Total feature words the compiled module consumes (sum of input widths).
inline long feature_arity(const Module& m) {
  long n = 0;
  for (const auto& d : m.decls)
    if (d.kind == TensorKind::Input) n += static_cast<long>(d.words());
  return n;
}

struct InferResult {
  std::vector<int64_t> scores;  // flattened outputs, declaration order
  double latency_ns = 0.0;
};

// Runs the compiled fabric program on the feature slice. The feature words
// are split across the module's input tensors in declaration order; the
// functional result is the fabric executor's, which the test suite holds
// bit-identical to the reference interpreter.
inline InferResult infer(const Phv& phv, const PhvLayout& layout, const Module& m,
                         const std::map<std::string, std::vector<int64_t>>& weights,
                         const LutSet& luts) {
  std::vector<int64_t> feats = feature_slice(layout, phv);
  if (static_cast<long>(feats.size()) != feature_arity(m))
    throw Error("infer: feature slice width " + std::to_string(feats.size()) +
                " does not match input arity " + std::to_string(feature_arity(m)));
  std::map<std::string, std::vector<int64_t>> tensors = weights;
  size_t off = 0;
  for (const auto& d : m.decls) {
    if (d.kind != TensorKind::Input) continue;
    auto n = static_cast<size_t>(d.words());
    tensors[d.name] = std::vector<int64_t>(feats.begin() + off, feats.begin() + off + n);
    off += n;
  }
  auto outs = execute(m, tensors, luts);
  InferResult r;
  for (const auto& d : m.decls) {
    if (d.kind != TensorKind::Output) continue;
    const auto& v = outs.at(d.name);
    r.scores.insert(r.scores.end(), v.begin(), v.end());
  }
  r.latency_ns = m.perf.latency_ns;
  return r;
}

// ==========================================================================
// guards
// ==========================================================================

// One ternary deny pattern over the configured key fields.
struct AclRule {
  std::vector<uint64_t> value;
  std::vector<uint64_t> mask;
};

struct GuardConfig {
  double threshold = 0.5;         // ML score boundary, in the score format
  double hysteresis_delta = 0.0;  // boundary offset after a decision, >= 0
  long decision_timeout_pkts = 1; // minimum packets per decision
  std::vector<std::string> acl_keys;  // empty = five-tuple
  std::vector<AclRule> acl;
  double min_bandwidth_frac = 0.0;    // per-flow departure floor in [0, 1)
  long window = 1024;                 // departures per floor-accounting window
  long lru_flows = 4096;              // bound on tracked per-flow guard states
};

enum class Verdict { Benign, Anomalous };

inline bool acl_match(const GuardConfig& g, const PhvLayout& layout, const Phv& phv) {
  const auto& keys = g.acl_keys.empty() ? five_tuple_fields() : g.acl_keys;
  for (const auto& rule : g.acl) {
    bool hit = true;
    for (size_t i = 0; i < keys.size() && hit; ++i) {
      int s = layout.slot(keys[i]);
      if (s < 0) throw Error("acl key not in phv layout: " + keys[i]);
      auto v = static_cast<uint64_t>(phv.slots[s]);
      hit = (v & rule.mask.at(i)) == (rule.value.at(i) & rule.mask.at(i));
    }
    if (hit) return true;
  }
  return false;
}

// Stateless union verdict: anomalous iff the score clears the boundary or
// any deny pattern matches. The ACL term can only add flags, never remove.
inline Verdict guard_acl(const PhvLayout& layout, const Phv& phv, int64_t score_raw,
                         FixedFormat score_fmt, const GuardConfig& g) {
  bool ml = score_raw > fx_quantize(g.threshold, score_fmt);
  return (ml || acl_match(g, layout, phv)) ? Verdict::Anomalous : Verdict::Benign;
}

struct FlowGuardState {
  bool init = false;
  bool anomalous = false;
  long pkts_in_decision = 0;
};

// Timeout first, hysteresis second: a decision younger than the dwell is
// frozen; once the dwell is met the boundary to leave the current class sits
// delta beyond the base threshold, shifted away from that class.
inline bool guard_hysteresis(FlowGuardState& st, int64_t score_raw, int64_t threshold_raw,
                             int64_t delta_raw, long timeout_pkts) {
  if (!st.init) {
    st.init = true;
    st.anomalous = score_raw > threshold_raw;
    st.pkts_in_decision = 1;
    return st.anomalous;
  }
  if (st.pkts_in_decision < timeout_pkts) {
    ++st.pkts_in_decision;
    return st.anomalous;
  }
  bool flip = st.anomalous ? score_raw <= threshold_raw - delta_raw
                           : score_raw > threshold_raw + delta_raw;
  if (flip) {
    st.anomalous = !st.anomalous;
    st.pkts_in_decision = 1;
  } else {
    ++st.pkts_in_decision;
  }
  return st.anomalous;
}

// Bounded per-flow state store, least-recently-used eviction. An evicted
// flow restarts as if its next packet were its first.
class GuardStateLru {
 public:
  explicit GuardStateLru(long capacity) : cap_(capacity < 1 ? 1 : capacity) {}

  FlowGuardState& touch(uint64_t flow) {
    auto it = pos_.find(flow);
    if (it != pos_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    if (static_cast<long>(order_.size()) >= cap_) {
      pos_.erase(order_.back().first);
      order_.pop_back();
    }
    order_.emplace_front(flow, FlowGuardState{});
    pos_[flow] = order_.begin();
    return order_.front().second;
  }

  bool tracked(uint64_t flow) const { return pos_.count(flow) != 0; }
  long size() const { return static_cast<long>(order_.size()); }

 private:
  long cap_;
  std::list<std::pair<uint64_t, FlowGuardState>> order_;
  std::unordered_map<uint64_t, std::list<std::pair<uint64_t, FlowGuardState>>::iterator> pos_;
};

// ==========================================================================
// scheduling
// ==========================================================================

struct PifoEntry {
  int64_t rank = 0;
  uint64_t seq = 0;  // insertion order, breaks rank ties FIFO
  long value = 0;
};

// Heap ordering: lowest rank first, lowest sequence number among equals.
struct PifoAfter {
  bool operator()(const PifoEntry& x, const PifoEntry& y) const {
    if (x.rank != y.rank) return x.rank > y.rank;
    return x.seq > y.seq;
  }
};

// Push-in first-out queue: dequeue returns the minimum rank, FIFO among
// equal ranks.
class PifoQueue {
 public:
  void push(int64_t rank, long value) { heap_.push(PifoEntry{rank, seq_++, value}); }
  bool empty() const { return heap_.empty(); }
  size_t size() const { return heap_.size(); }

  PifoEntry pop() {
    if (heap_.empty()) throw Error("pifo: pop from empty queue");
    PifoEntry e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  std::priority_queue<PifoEntry, std::vector<PifoEntry>, PifoAfter> heap_;
  uint64_t seq_ = 0;
};

// PIFO scheduler with a per-flow minimum-bandwidth floor. Departures are
// accounted in tumbling windows; inside a window each flow owes
// floor(frac * window) departures. When the remaining slots of the window
// are all spoken for by outstanding debts, the neediest flow's oldest packet
// departs with its rank forced to minus infinity; otherwise the global
// minimum-rank packet departs.
class Scheduler {
 public:
  Scheduler(double floor_frac, long window)
      : frac_(floor_frac), window_(window < 1 ? 1 : window) {
    if (floor_frac < 0.0 || floor_frac >= 1.0)
      throw Error("scheduler: floor fraction must be in [0, 1)");
  }

  void push(uint64_t flow, int64_t rank, long value) {
    auto seq = static_cast<uint64_t>(items_.size());
    items_.push_back(Item{rank, flow, value, false});
    heap_.push(PifoEntry{rank, seq, value});
    fifo_[flow].push_back(seq);
    ++backlog_[flow];
    ++remaining_;
  }

  bool empty() const { return remaining_ == 0; }
  long size() const { return remaining_; }

  struct Departure {
    long value = 0;
    uint64_t flow = 0;
    int64_t rank = 0;
    bool forced = false;  // floor override, effective rank minus infinity
  };

  Departure pop() {
    if (remaining_ == 0) throw Error("scheduler: pop from empty queue");
    check_feasible();
    Departure d;
    uint64_t needy = 0;
    if (frac_ > 0.0 && pick_needy(needy)) {
      uint64_t seq = front_of(needy);
      d = Departure{items_[seq].value, needy, items_[seq].rank, true};
      retire(seq);
    } else {
      while (items_[heap_.top().seq].gone) heap_.pop();
      uint64_t seq = heap_.top().seq;
      heap_.pop();
      d = Departure{items_[seq].value, items_[seq].flow, items_[seq].rank, false};
      retire(seq);
    }
    ++served_[d.flow];
    if (++win_pos_ == window_) {
      win_pos_ = 0;
      served_.clear();
    }
    --remaining_;
    return d;
  }

 private:
  struct Item {
    int64_t rank;
    uint64_t flow;
    long value;
    bool gone;
  };

  long target() const {
    return static_cast<long>(frac_ * static_cast<double>(window_) + 1e-9);
  }

  void check_feasible() {
    if (frac_ <= 0.0) return;
    long active = 0;
    for (const auto& [f, n] : backlog_)
      if (n > 0) ++active;
    if (frac_ * static_cast<double>(active) > 1.0 + 1e-9)
      throw Error("scheduler: floor infeasible for " + std::to_string(active) + " flows");
  }

  // True when the window's remaining slots are fully claimed by debts; out
  // is then the backlogged flow with the largest outstanding debt.
  bool pick_needy(uint64_t& out) {
    long t = target();
    long sum = 0, best = 0;
    bool found = false;
    for (const auto& [f, n] : backlog_) {
      if (n <= 0) continue;
      long served = 0;
      auto it = served_.find(f);
      if (it != served_.end()) served = it->second;
      long need = std::min<long>(std::max<long>(t - served, 0), n);
      sum += need;
      if (need > best) {
        best = need;
        out = f;
        found = true;
      }
    }
    return found && sum >= window_ - win_pos_;
  }

  uint64_t front_of(uint64_t flow) {
    auto& q = fifo_[flow];
    while (items_[q.front()].gone) q.pop_front();
    return q.front();
  }

  void retire(uint64_t seq) {
    items_[seq].gone = true;
    --backlog_[items_[seq].flow];
  }

  std::vector<Item> items_;
  std::priority_queue<PifoEntry, std::vector<PifoEntry>, PifoAfter> heap_;
  std::map<uint64_t, std::deque<uint64_t>> fifo_;
  std::map<uint64_t, long> backlog_;
  std::map<uint64_t, long> served_;  // departures in the current window
  long remaining_ = 0;
  double frac_;
  long window_;
  long win_pos_ = 0;
};

// ==========================================================================
// pipeline replay
// ==========================================================================

struct PipelineConfig {
  PhvLayout layout;
  std::vector<MatTable> tables;  // applied in order before inference
  bool use_model = false;        // false = bypass run, no inference stage
  Module model;
  std::map<std::string, std::vector<int64_t>> weights;
  LutSet luts;
  GuardConfig guards;
  double base_latency_ns = 1000.0;  // parse/match/forward baseline
  int score_word = 0;               // output word used as the anomaly score
  int64_t rank_benign = 0;
  int64_t rank_anomalous = 1ll << 20;
};

struct PacketDecision {
  long index = 0;
  uint64_t flow = 0;
  bool rate_limited = false;  // arrived inside the model's initiation interval
  bool acl_hit = false;
  bool ml_flag = false;       // hysteretic per-flow ML decision
  bool anomalous = false;     // final verdict: ml_flag or acl_hit
  int64_t score_raw = 0;
  int64_t rank = 0;
  double latency_ns = 0.0;
};

struct PipelineStats {
  long packets = 0;
  long benign = 0;
  long anomalous = 0;
  long acl_hits = 0;
  long ml_flags = 0;
  long rate_limited = 0;
  long inferred = 0;
  long forced_departures = 0;
  // Two-stage latency model: parse/match/forward ride in the base switch
  // latency, inference adds the mapped model's pipeline latency on top.
  double base_latency_ns = 0.0;
  double infer_latency_ns = 0.0;
  double mean_latency_ns = 0.0;
  double added_latency_frac = 0.0;
  std::vector<long> departure_order;
};

struct PipelineResult {
  std::vector<PacketDecision> decisions;
  PipelineStats stats;
};

// Deterministic replay of a trace through parse -> match-action -> inference
// -> guards -> schedule. Packets arriving before the model's initiation
// interval has elapsed are marked rate-limited and keep the flow's previous
// decision; the fabric is not consulted for them.
inline PipelineResult run_pipeline(const std::vector<PacketRecord>& trace,
                                   const PipelineConfig& cfg) {
  PipelineResult res;
  res.stats.base_latency_ns = cfg.base_latency_ns;
  res.stats.infer_latency_ns = cfg.use_model ? cfg.model.perf.latency_ns : 0.0;
  FixedFormat fmt = cfg.use_model ? cfg.model.fmt : kFix16;
  int64_t thr = fx_quantize(cfg.guards.threshold, fmt);
  int64_t delta = fx_quantize(cfg.guards.hysteresis_delta, fmt);
  GuardStateLru lru(cfg.guards.lru_flows);
  Scheduler sched(cfg.guards.min_bandwidth_frac, cfg.guards.window);
  int64_t next_free_ns = 0;
  double total_ns = 0.0;
  for (size_t i = 0; i < trace.size(); ++i) {
    const PacketRecord& p = trace[i];
    Phv phv = parse(p, cfg.layout);
    for (const auto& t : cfg.tables) phv = mat_apply(t, cfg.layout, std::move(phv));
    PacketDecision d;
    d.index = static_cast<long>(i);
    d.flow = flow_id(p);
    d.latency_ns = cfg.base_latency_ns;
    FlowGuardState& st = lru.touch(d.flow);
    if (cfg.use_model) {
      // One packet per initiation interval at 1 cycle per ns times clock.
      double cycle_ns = 1.0 / cfg.model.fabric.clock_ghz;
      if (p.arrival_ns >= next_free_ns) {
        InferResult inf = infer(phv, cfg.layout, cfg.model, cfg.weights, cfg.luts);
        d.score_raw = inf.scores.at(static_cast<size_t>(cfg.score_word));
        d.latency_ns += inf.latency_ns;
        next_free_ns = p.arrival_ns +
                       static_cast<int64_t>(cfg.model.perf.ii * cycle_ns + 0.5);
        res.stats.inferred++;
        d.ml_flag = guard_hysteresis(st, d.score_raw, thr, delta,
                                     cfg.guards.decision_timeout_pkts);
      } else {
        d.rate_limited = true;
        res.stats.rate_limited++;
        d.ml_flag = st.init && st.anomalous;
      }
    } else {
      d.ml_flag = guard_hysteresis(st, 0, thr, delta, cfg.guards.decision_timeout_pkts);
    }
    d.acl_hit = acl_match(cfg.guards, cfg.layout, phv);
    d.anomalous = d.ml_flag || d.acl_hit;
    d.rank = d.anomalous ? cfg.rank_anomalous : cfg.rank_benign;
    sched.push(d.flow, d.rank, d.index);
    total_ns += d.latency_ns;
    res.stats.packets++;
    res.stats.benign += d.anomalous ? 0 : 1;
    res.stats.anomalous += d.anomalous ? 1 : 0;
    res.stats.acl_hits += d.acl_hit ? 1 : 0;
    res.stats.ml_flags += d.ml_flag ? 1 : 0;
    res.decisions.push_back(d);
  }
  while (!sched.empty()) {
    auto dep = sched.pop();
    res.stats.departure_order.push_back(dep.value);
    res.stats.forced_departures += dep.forced ? 1 : 0;
  }
  if (res.stats.packets > 0) {
    res.stats.mean_latency_ns = total_ns / static_cast<double>(res.stats.packets);
    res.stats.added_latency_frac =
        (res.stats.mean_latency_ns - cfg.base_latency_ns) / cfg.base_latency_ns;
  }
  return res;
}

// ==========================================================================
// trace and decision-log text formats
// ==========================================================================

inline const char* kTraceHeader = "#mrdp-trace v1";
inline const char* kDecisionHeader = "#mrdp-decisions v1";

inline std::string format_trace(const std::vector<PacketRecord>& trace) {
  std::ostringstream os;
  os << kTraceHeader << "\n";
  for (const auto& p : trace) {
    os << "ts=" << p.arrival_ns << " len=" << p.payload_len;
    for (const auto& [k, v] : p.fields) os << " " << k << "=" << v;
    os << "\n";
  }
  return os.str();
}

inline std::vector<PacketRecord> parse_trace(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || trim(line) != kTraceHeader)
    throw IoError("trace: missing '" + std::string(kTraceHeader) + "' header");
  std::vector<PacketRecord> out;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    PacketRecord p;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw IoError("trace line " + std::to_string(lineno) + ": expected key=value");
      std::string k = tok.substr(0, eq);
      uint64_t v = 0;
      try {
        v = std::stoull(tok.substr(eq + 1));
      } catch (const std::exception&) {
        throw IoError("trace line " + std::to_string(lineno) + ": bad integer in " + tok);
      }
      if (k == "ts")
        p.arrival_ns = static_cast<int64_t>(v);
      else if (k == "len")
        p.payload_len = static_cast<long>(v);
      else
        p.set(k, v);
    }
    for (const auto& name : five_tuple_fields())
      if (!p.has(name))
        throw IoError("trace line " + std::to_string(lineno) + ": missing " + name);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string format_decisions(const std::vector<PacketDecision>& ds) {
  std::ostringstream os;
  os << kDecisionHeader << "\n";
  for (const auto& d : ds) {
    os << d.index << " flow=" << d.flow
       << " verdict=" << (d.anomalous ? "anomalous" : "benign")
       << " score=" << d.score_raw << " rank=" << d.rank
       << " latency_ns=" << format_fixed(d.latency_ns, 2);
    if (d.acl_hit) os << " acl";
    if (d.rate_limited) os << " rate_limited";
    os << "\n";
  }
  return os.str();
}

// ==========================================================================
// synthetic traces
// ==========================================================================

struct TraceSynth {
  long packets = 0;
  int flows = 4;
  int64_t gap_ns = 1000;             // inter-arrival spacing
  std::vector<std::string> extras;   // extra header fields to populate
  int64_t lo = -128;                 // extra value range (raw words)
  int64_t hi = 127;
  uint64_t seed = 1;
};

// Reproducible trace: a fixed five-tuple per flow index, packets assigned to
// flows uniformly, extras drawn uniformly from [lo, hi].
inline std::vector<PacketRecord> synth_trace(const TraceSynth& c) {
  SplitMix64 rng(c.seed ^ 0x74726163ull);
  std::vector<PacketRecord> out;
  out.reserve(static_cast<size_t>(c.packets));
  for (long i = 0; i < c.packets; ++i) {
    auto f = static_cast<uint64_t>(rng.next_below(static_cast<uint64_t>(
        c.flows < 1 ? 1 : c.flows)));
    PacketRecord p;
    p.arrival_ns = i * c.gap_ns;
    p.payload_len = static_cast<long>(64 + rng.next_below(1437));
    p.set("src_ip", 0x0a000000ull + f);
    p.set("dst_ip", 0x0a800000ull + f * 7 + 1);
    p.set("src_port", 1024 + f);
    p.set("dst_port", 443);
    p.set("proto", 6);
    for (const auto& name : c.extras) {
      auto span = static_cast<uint64_t>(c.hi - c.lo + 1);
      p.set(name, static_cast<uint64_t>(c.lo + static_cast<int64_t>(rng.next_below(span))));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mrdp

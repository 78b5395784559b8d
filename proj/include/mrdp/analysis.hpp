// mrdp - map-reduce data plane model - cache, fct and table studies
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mrdp/common.hpp"
#include "mrdp/compiler.hpp"
#include "mrdp/fabric.hpp"
#include "mrdp/models.hpp"
#include "mrdp/parser.hpp"
#include "mrdp/validate.hpp"

namespace mrdp {

// ==========================================================================
// traffic model
// ==========================================================================

// Synthetic traffic: n_flows flows with heavy-tailed sizes, each packet
// carrying unstable_fields extra headers whose values are drawn fresh per
// packet from 2^field_entropy_bits possibilities. The Pareto stand-in for
// the size distribution is a documented default, not a measured trace.
struct FlowModel {
  std::string flow_size_dist = "pareto";  // "pareto" or "fixed"
  double pareto_shape = 1.2;
  long long size_min = 1;
  long long size_cap = 1000000;
  long n_flows = 1000;
  int unstable_fields = 0;
  double field_entropy_bits = 16.0;
  uint64_t rng_seed = 1;
};

struct LatencyConstants {
  double rule_install_ms = 3.0;   // TCAM rule insertion
  double cpu_infer_ms = 0.67;     // control-plane inference backends
  double gpu_infer_ms = 1.15;
  double tpu_infer_ms = 3.51;
  double switch_base_latency_us = 1.0;
  double switch_infer_ns = 188.0;  // mapped model latency inside the switch
  double link_gbps = 100.0;        // bottleneck link
  double pkt_bytes = 1250.0;       // nominal wire size per packet

  void validate() const {
    for (double v : {rule_install_ms, cpu_infer_ms, gpu_infer_ms, tpu_infer_ms,
                     switch_base_latency_us, switch_infer_ns, link_gbps, pkt_bytes})
      if (!(v > 0.0)) throw Error("latency constants must all be positive");
  }

  double wire_ms() const { return pkt_bytes * 8.0 / link_gbps * 1e-6; }
  double base_ms() const { return switch_base_latency_us * 1e-3; }
  // One trip to the control plane: inference plus rule installation.
  double control_visit_ms() const { return cpu_infer_ms + rule_install_ms; }
};

namespace detail {

// One splitmix step keyed by h ^ v: a cheap stateless mixer whose repeated
// application chains identity words into an independent-looking draw.
inline uint64_t chain(uint64_t h, uint64_t v) { return SplitMix64(h ^ v).next(); }

// Per-packet unstable header value. Taking the TOP bits makes the value at
// lower entropy an exact prefix of the value at higher entropy, so reducing
// entropy coarsens the key space pointwise, not just in expectation.
inline uint64_t unstable_value(uint64_t seed, uint64_t flow, uint64_t pkt, int field,
                               double bits) {
  if (bits <= 0.0) return 0;
  uint64_t h = chain(chain(chain(seed, 0x756e7374ull ^ flow), pkt), static_cast<uint64_t>(field));
  if (bits >= 64.0) return h;
  double ip = 0.0;
  if (std::modf(bits, &ip) == 0.0) return h >> (64 - static_cast<int>(bits));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return static_cast<uint64_t>(u * std::exp2(bits));
}

inline long long sampled_flow_size(const FlowModel& fm, long flow) {
  if (fm.size_min < 1) throw Error("flow sizes must be at least 1 packet");
  if (fm.flow_size_dist == "fixed") return fm.size_min;
  if (fm.flow_size_dist != "pareto")
    throw Error("unknown flow size distribution: " + fm.flow_size_dist);
  uint64_t h = chain(chain(fm.rng_seed, 0x73697a65ull), static_cast<uint64_t>(flow));
  double u = 1.0 - static_cast<double>(h >> 11) * 0x1.0p-53;  // (0, 1]
  auto sz = static_cast<long long>(static_cast<double>(fm.size_min) *
                                   std::pow(u, -1.0 / fm.pareto_shape));
  return std::min(std::max(sz, fm.size_min), fm.size_cap);
}

// 128-bit cache key: the flow tag plus the tuple of unstable values, folded
// through two independent chains so hash collisions are out of the picture.
struct CacheKeyHash {
  size_t operator()(const std::pair<uint64_t, uint64_t>& k) const {
    return static_cast<size_t>(k.first ^ (k.second * 0x9e3779b97f4a7c15ull));
  }
};

inline std::pair<uint64_t, uint64_t> cache_key(const FlowModel& fm, uint64_t flow,
                                               uint64_t pkt) {
  uint64_t k1 = chain(0x6b657931ull, flow);
  uint64_t k2 = chain(0x6b657932ull, flow);
  for (int f = 0; f < fm.unstable_fields; ++f) {
    uint64_t v = unstable_value(fm.rng_seed, flow, pkt, f, fm.field_entropy_bits);
    k1 = chain(k1, v);
    k2 = chain(k2 + 1, v);
  }
  return {k1, k2};
}

}  // namespace detail

// ==========================================================================
// cache-miss study
// ==========================================================================

struct CacheMissStats {
  long long packets = 0;
  long long misses = 0;
  double rate = 0.0;
};

// Infinite rule space: a key misses exactly once, on first sight. The cache
// key is the five-tuple plus every unstable field's per-packet value.
inline CacheMissStats cache_miss_stats(const FlowModel& fm) {
  CacheMissStats s;
  std::unordered_set<std::pair<uint64_t, uint64_t>, detail::CacheKeyHash> seen;
  for (long f = 0; f < fm.n_flows; ++f) s.packets += detail::sampled_flow_size(fm, f);
  seen.reserve(static_cast<size_t>(s.packets));
  for (long f = 0; f < fm.n_flows; ++f) {
    long long sz = detail::sampled_flow_size(fm, f);
    for (long long k = 0; k < sz; ++k)
      if (seen.insert(detail::cache_key(fm, static_cast<uint64_t>(f),
                                        static_cast<uint64_t>(k))).second)
        ++s.misses;
  }
  s.rate = s.packets ? static_cast<double>(s.misses) / static_cast<double>(s.packets) : 0.0;
  return s;
}

inline double cache_miss_rate(const FlowModel& fm) { return cache_miss_stats(fm).rate; }

// ==========================================================================
// flow-completion-time study
// ==========================================================================

enum class FctScheme { Caching, Dataplane };

// Completion time of one flow in a minimally loaded network, in ms.
// Dataplane: the first packet takes the control-plane trip that installs the
// flow's forwarding state, every later packet pays wire + switch + in-switch
// inference. Caching: every packet whose cache key is unseen takes the
// control-plane trip; cached packets pay wire + switch only.
inline double flow_completion_ms(const FlowModel& fm, const LatencyConstants& lc,
                                 FctScheme scheme, long flow, long long pkts) {
  lc.validate();
  if (pkts < 1) throw Error("flow completion needs at least 1 packet");
  double total = 0.0;
  if (scheme == FctScheme::Dataplane) {
    total += lc.wire_ms() + lc.control_visit_ms();
    total += static_cast<double>(pkts - 1) *
             (lc.wire_ms() + lc.base_ms() + lc.switch_infer_ns * 1e-6);
    return total;
  }
  std::unordered_set<std::pair<uint64_t, uint64_t>, detail::CacheKeyHash> seen;
  for (long long k = 0; k < pkts; ++k) {
    bool miss = seen.insert(detail::cache_key(fm, static_cast<uint64_t>(flow),
                                              static_cast<uint64_t>(k))).second;
    total += lc.wire_ms() + (miss ? lc.control_visit_ms() : lc.base_ms());
  }
  return total;
}

// Per-flow completion times for the model's sampled flow sizes.
inline std::vector<double> fct_compare(const FlowModel& fm, const LatencyConstants& lc,
                                       FctScheme scheme) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(fm.n_flows));
  for (long f = 0; f < fm.n_flows; ++f)
    out.push_back(flow_completion_ms(fm, lc, scheme, f, detail::sampled_flow_size(fm, f)));
  return out;
}

// ==========================================================================
// table reports
// ==========================================================================

struct ReportTable {
  std::string name;   // stable key: fu_cost | applications | kernels | unroll
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<bool> row_ok;  // per-row tolerance flag

  bool ok() const {
    for (bool b : row_ok)
      if (!b) return false;
    return true;
  }
};

struct SuiteReport {
  std::vector<ReportTable> tables;

  bool all_ok() const {
    for (const auto& t : tables)
      if (!t.ok()) return false;
    return true;
  }

  const ReportTable* find(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return &t;
    return nullptr;
  }
};

// Tolerance overrides for report scoring; defaults mirror the shipped bands.
struct ToleranceBands {
  double latency = kLatencyBand;
  double area = kAreaBand;
  double power = kPowerCeiling;
};

namespace detail {

inline bool within(double got, double want, double frac) {
  return got >= want * (1.0 - frac) && got <= want * (1.0 + frac);
}

inline bool rate_exact(double got, double want) { return std::abs(got - want) <= 1e-9; }

// Index-parallel work loop: study points and benchmark compiles are
// independent, so jobs > 1 shards them over a small worker pool. The first
// worker exception is rethrown after the pool drains.
template <class Fn>
inline void parallel_for(size_t n, int jobs, Fn fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  size_t spawn = std::min(static_cast<size_t>(jobs), n);
  for (size_t i = 0; i < spawn; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// Scores a measured report against its published reference row using the
// configured tolerance bands. Zero reference columns are unscored.
inline bool envelope_ok(const BenchmarkSpec& spec, const PerfReport& got,
                        const ToleranceBands& tb) {
  const PerfTarget& t = spec.target;
  if (got.ii < t.ii_lo || got.ii > t.ii_hi) return false;
  if (t.rate_gpps > 0 && !rate_exact(got.rate_gpps, 1.0 / got.ii)) return false;
  if (spec.calibration)
    return std::abs(got.latency_ns - t.latency_ns) <= 1e-6 &&
           std::abs(got.area_mm2 - t.area_mm2) <= 1e-6;
  if (t.latency_ns > 0 && !within(got.latency_ns, t.latency_ns, tb.latency)) return false;
  if (t.area_mm2 > 0 && !within(got.area_mm2, t.area_mm2, tb.area)) return false;
  if (t.power_mw > 0 && got.power_mw > t.power_mw * tb.power) return false;
  return true;
}

inline std::string fmt1(double v) { return format_fixed(v, 1); }
inline std::string fmt2(double v) { return format_fixed(v, 2); }
inline std::string fmt3(double v) { return format_fixed(v, 3); }

inline PerfReport compile_report(const BenchmarkSpec& spec, const CompileOptions& opts) {
  Program p = parse_program(spec.source);
  validate(p);
  return compile(p, opts).perf;
}

}  // namespace detail

// Builds the published-table analogs for the given suite: functional-unit
// costs, application overheads, kernel area/latency, and the unroll sweeps.
// Every row carries a tolerance flag; an empty suite yields an empty report.
inline SuiteReport report_tables(const std::vector<BenchmarkSpec>& suite,
                                 const ToleranceBands& tb = {}, int jobs = 1) {
  SuiteReport rep;
  if (suite.empty()) return rep;

  // Stage every compile up front: one per suite row, then every sweep point
  // whose kernel is in the suite. Rows are independent, so they parallelize.
  struct CompileJob {
    const BenchmarkSpec* spec;
    CompileOptions opts;
    PerfReport out;
  };
  std::vector<CompileJob> work;
  for (const auto& spec : suite) work.push_back({&spec, spec.options, {}});
  std::vector<std::pair<const UnrollSweep*, size_t>> sweep_jobs;  // sweep, base index
  for (const auto& sweep : unroll_sweeps()) {
    const BenchmarkSpec* spec = nullptr;
    for (const auto& s : suite)
      if (s.name == sweep.bench) spec = &s;
    if (!spec) continue;
    sweep_jobs.emplace_back(&sweep, work.size());
    for (const auto& pt : sweep.points)
      work.push_back({spec, sweep_options(*spec, pt.unroll), {}});
  }
  detail::parallel_for(work.size(), jobs,
                       [&](size_t i) { work[i].out = detail::compile_report(*work[i].spec, work[i].opts); });

  // Functional unit costs (reference: 3877/8108/20203 um^2, 223/393/759 uW).
  ReportTable fu;
  fu.name = "fu_cost";
  fu.title = "functional unit area and power";
  fu.columns = {"precision", "area_um2", "power_uw", "flag"};
  const struct {
    const char* name;
    FixedFormat fmt;
    int64_t area;
    double power;
  } kFu[] = {{"fix8", kFix8, 3877, 223.0}, {"fix16", kFix16, 8108, 393.0},
             {"fix32", kFix32, 20203, 759.0}};
  for (const auto& row : kFu) {
    FuCost c = fu_cost(row.fmt);
    bool ok = c.area_um2 == row.area && c.power_uw == row.power;
    fu.rows.push_back({row.name, std::to_string(c.area_um2),
                       format_fixed(c.power_uw, 0), ok ? "ok" : "DEVIATION"});
    fu.row_ok.push_back(ok);
  }
  rep.tables.push_back(std::move(fu));

  ReportTable apps;
  apps.name = "applications";
  apps.title = "application models: rate, latency, area, power";
  apps.columns = {"model", "rate_gpps", "ii", "latency_ns", "ref_ns",
                  "area_mm2", "ref_mm2", "power_mw", "flag"};
  ReportTable kern;
  kern.name = "kernels";
  kern.title = "microbenchmarks: latency and area";
  kern.columns = {"kernel", "rate_gpps", "latency_ns", "ref_ns",
                  "area_mm2", "ref_mm2", "flag"};
  double lat_sum = 0, lat_ref_sum = 0, area_sum = 0, area_ref_sum = 0;
  long app_rows = 0;
  for (size_t si = 0; si < suite.size(); ++si) {
    const BenchmarkSpec& spec = suite[si];
    const PerfReport& got = work[si].out;
    bool ok = detail::envelope_ok(spec, got, tb);
    if (spec.group == "app") {
      apps.rows.push_back({spec.name, detail::fmt3(got.rate_gpps),
                           std::to_string(got.ii), detail::fmt1(got.latency_ns),
                           detail::fmt1(spec.target.latency_ns), detail::fmt3(got.area_mm2),
                           detail::fmt2(spec.target.area_mm2), detail::fmt1(got.power_mw),
                           ok ? "ok" : "DEVIATION"});
      apps.row_ok.push_back(ok);
      lat_sum += got.latency_ns;
      lat_ref_sum += spec.target.latency_ns;
      area_sum += got.area_mm2;
      area_ref_sum += spec.target.area_mm2;
      ++app_rows;
    } else {
      kern.rows.push_back({spec.name, detail::fmt3(got.rate_gpps),
                           detail::fmt1(got.latency_ns), detail::fmt1(spec.target.latency_ns),
                           detail::fmt3(got.area_mm2), detail::fmt2(spec.target.area_mm2),
                           ok ? "ok" : "DEVIATION"});
      kern.row_ok.push_back(ok);
    }
  }
  // Headline row: the suite average against the published averages.
  if (app_rows > 0) {
    double lat_mean = lat_sum / app_rows;
    double area_mean = area_sum / app_rows;
    bool ok = detail::within(lat_mean, lat_ref_sum / app_rows, tb.latency) &&
              detail::within(area_mean, area_ref_sum / app_rows, tb.area);
    apps.rows.push_back({"mean", "", "", detail::fmt1(lat_mean),
                         detail::fmt1(lat_ref_sum / app_rows), detail::fmt3(area_mean),
                         detail::fmt2(area_ref_sum / app_rows), "",
                         ok ? "ok" : "DEVIATION"});
    apps.row_ok.push_back(ok);
  }
  if (!apps.rows.empty()) rep.tables.push_back(std::move(apps));
  if (!kern.rows.empty()) rep.tables.push_back(std::move(kern));

  ReportTable unroll;
  unroll.name = "unroll";
  unroll.title = "line-rate fraction and area versus unroll degree";
  unroll.columns = {"kernel", "unroll", "rate_gpps", "ref_rate", "area_mm2",
                    "ref_mm2", "flag"};
  for (const auto& [sweep, base] : sweep_jobs) {
    double prev_area = 0.0;
    for (size_t pi = 0; pi < sweep->points.size(); ++pi) {
      const SweepPoint& pt = sweep->points[pi];
      const CompileJob& job = work[base + pi];
      const PerfReport& got = job.out;
      bool ok = detail::rate_exact(got.rate_gpps, pt.rate_gpps) &&
                detail::within(got.area_mm2, pt.area_mm2, tb.area) &&
                got.area_mm2 > prev_area;  // strict monotonicity in unroll
      prev_area = got.area_mm2;
      unroll.rows.push_back({job.spec->name, std::to_string(pt.unroll),
                             detail::fmt3(got.rate_gpps), detail::fmt3(pt.rate_gpps),
                             detail::fmt3(got.area_mm2), detail::fmt2(pt.area_mm2),
                             ok ? "ok" : "DEVIATION"});
      unroll.row_ok.push_back(ok);
    }
  }
  if (!unroll.rows.empty()) rep.tables.push_back(std::move(unroll));
  return rep;
}

// ==========================================================================
// rendering
// ==========================================================================

inline const char* kReportHeader = "#mrdp-tables v1";
inline const char* kCsvHeader = "#mrdp-csv v1";

inline std::string report_to_text(const SuiteReport& rep) {
  std::ostringstream os;
  os << kReportHeader << "\n";
  for (const auto& t : rep.tables) {
    os << "\n[" << t.name << "] " << t.title << "\n";
    std::vector<size_t> w(t.columns.size());
    for (size_t c = 0; c < t.columns.size(); ++c) w[c] = t.columns[c].size();
    for (const auto& row : t.rows)
      for (size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], row[c].size());
    auto line = [&](const std::vector<std::string>& cells) {
      for (size_t c = 0; c < cells.size(); ++c) {
        os << cells[c];
        if (c + 1 < cells.size()) os << std::string(w[c] - cells[c].size() + 2, ' ');
      }
      os << "\n";
    };
    line(t.columns);
    for (const auto& row : t.rows) line(row);
  }
  return os.str();
}

// Long form, one value per line: table,row,column,value.
inline std::string report_to_csv(const SuiteReport& rep) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  os << "table,row,column,value\n";
  for (const auto& t : rep.tables)
    for (const auto& row : t.rows)
      for (size_t c = 1; c < row.size(); ++c)
        os << t.name << "," << row[0] << "," << t.columns[c] << "," << row[c] << "\n";
  return os.str();
}

// Plot-ready miss-rate curves: x = unstable fields, one series per entropy.
// Points are independent; jobs > 1 computes them on a worker pool.
inline std::string cache_curve_csv(const FlowModel& base, const std::vector<int>& fields,
                                   const std::vector<double>& entropies, int jobs = 1) {
  std::vector<double> rates(entropies.size() * fields.size());
  detail::parallel_for(rates.size(), jobs, [&](size_t i) {
    FlowModel fm = base;
    fm.field_entropy_bits = entropies[i / fields.size()];
    fm.unstable_fields = fields[i % fields.size()];
    rates[i] = cache_miss_rate(fm);
  });
  std::ostringstream os;
  os << kCsvHeader << "\n";
  os << "x,y,series\n";
  size_t i = 0;
  for (double e : entropies)
    for (int f : fields)
      os << f << "," << format_fixed(rates[i++], 6) << ",entropy" << format_fixed(e, 0)
         << "\n";
  return os.str();
}

// Plot-ready completion-time curves: x = flow size in packets, one series
// per scheme.
inline std::string fct_curve_csv(const FlowModel& fm, const LatencyConstants& lc,
                                 const std::vector<long long>& sizes, int jobs = 1) {
  std::vector<double> ms(2 * sizes.size());
  detail::parallel_for(ms.size(), jobs, [&](size_t i) {
    FctScheme scheme = i < sizes.size() ? FctScheme::Caching : FctScheme::Dataplane;
    ms[i] = flow_completion_ms(fm, lc, scheme, 0, sizes[i % sizes.size()]);
  });
  std::ostringstream os;
  os << kCsvHeader << "\n";
  os << "x,y,series\n";
  size_t i = 0;
  for (auto scheme : {FctScheme::Caching, FctScheme::Dataplane}) {
    for (long long n : sizes) {
      os << n << "," << format_fixed(ms[i++], 6) << ","
         << (scheme == FctScheme::Caching ? "caching" : "dataplane") << "\n";
    }
  }
  return os.str();
}

}  // namespace mrdp

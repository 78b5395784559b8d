// mrdp - map-reduce data plane model - command line tool
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
//
// Subcommands: compile, simulate, analyze (cache | fct | tables), report.
// Exit codes: 0 success, 1 usage, 2 parse/validate/compile error, 3 runtime.
// Every artifact carries a reproducibility block (seed plus the resolved
// configuration) right after its format header, as # comment lines that all
// of the format parsers skip. Settings resolve flags > config file > defaults
// via --config (key=value, with [subcommand] sections).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mrdp/analysis.hpp"
#include "mrdp/compiler.hpp"
#include "mrdp/datapath.hpp"
#include "mrdp/execute.hpp"
#include "mrdp/models.hpp"
#include "mrdp/parser.hpp"
#include "mrdp/validate.hpp"

namespace fs = std::filesystem;

namespace {

// Resolved run settings, recorded into every artifact.
struct RunConfig {
  std::string subcommand;
  std::string fabric_path;   // file with an #mrdp-fabric header, or "default"
  std::string program_path;  // .mr file or "bench:<name>"
  std::string weights_path;  // directory holding the load() csv files
  std::string trace_path;    // input trace, or "synthetic"
  std::string out_dir;       // empty = stdout
  uint64_t seed = 1;
  std::vector<std::pair<std::string, std::string>> extras;  // subcommand knobs

  void note(const std::string& k, const std::string& v) { extras.emplace_back(k, v); }
  void note(const std::string& k, long long v) { extras.emplace_back(k, std::to_string(v)); }
  void note(const std::string& k, double v) {
    extras.emplace_back(k, mrdp::format_fixed(v, 6));
  }

  std::string line() const {
    std::ostringstream os;
    os << "subcommand=" << subcommand;
    if (!program_path.empty()) os << " program=" << program_path;
    if (!fabric_path.empty()) os << " fabric=" << fabric_path;
    if (!weights_path.empty()) os << " weights=" << weights_path;
    if (!trace_path.empty()) os << " trace=" << trace_path;
    for (const auto& [k, v] : extras) os << " " << k << "=" << v;
    return os.str();
  }
};

// Inserts the reproducibility block after the artifact's header line so the
// format parsers, which skip # comments, are unaffected.
std::string stamp(std::string body, const RunConfig& rc) {
  std::string block =
      "# seed: " + std::to_string(rc.seed) + "\n# config: " + rc.line() + "\n";
  size_t nl = body.find('\n');
  if (nl == std::string::npos) return body + "\n" + block;
  body.insert(nl + 1, block);
  return body;
}

// Artifact sink: a run directory with a manifest, or stdout when no
// directory was requested.
class Sink {
 public:
  Sink(std::string dir, const RunConfig& rc) : dir_(std::move(dir)), rc_(rc) {}

  void put(const std::string& name, const std::string& body) {
    std::string stamped = stamp(body, rc_);
    if (dir_.empty()) {
      std::cout << stamped;
      if (!stamped.empty() && stamped.back() != '\n') std::cout << "\n";
      return;
    }
    fs::create_directories(dir_);
    mrdp::write_file(dir_ + "/" + name, stamped);
    files_.emplace_back(name, stamped.size());
  }

  bool wants_files() const { return !dir_.empty(); }

  void finish() {
    if (dir_.empty()) return;
    std::ostringstream os;
    os << "#mrdp-manifest v1\n";
    os << "# seed: " << rc_.seed << "\n";
    os << "# config: " << rc_.line() << "\n";
    for (const auto& [name, bytes] : files_) os << "artifact " << name << " " << bytes << "\n";
    mrdp::write_file(dir_ + "/manifest.txt", os.str());
    std::cerr << "wrote " << files_.size() + 1 << " files to " << dir_ << "\n";
  }

 private:
  std::string dir_;
  const RunConfig& rc_;
  std::vector<std::pair<std::string, size_t>> files_;
};

mrdp::FabricConfig load_fabric(const std::string& path) {
  if (path.empty() || path == "default") return mrdp::FabricConfig{};
  return mrdp::FabricConfig::from_kv(mrdp::read_file(path));
}

// Comma lists with .. ranges: "0..4,8" -> 0 1 2 3 4 8.
std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const std::string& part : mrdp::split(s, ',')) {
    std::string t = mrdp::trim(part);
    if (t.empty()) continue;
    try {
      size_t dd = t.find("..");
      if (dd == std::string::npos) {
        out.push_back(std::stoi(t));
      } else {
        int lo = std::stoi(t.substr(0, dd)), hi = std::stoi(t.substr(dd + 2));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw mrdp::IoError("bad integer list: " + s);
    }
  }
  if (out.empty()) throw mrdp::IoError("empty list: " + s);
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const std::string& part : mrdp::split(s, ',')) {
    std::string t = mrdp::trim(part);
    if (t.empty()) continue;
    try {
      out.push_back(std::stod(t));
    } catch (const std::logic_error&) {
      throw mrdp::IoError("bad number list: " + s);
    }
  }
  if (out.empty()) throw mrdp::IoError("empty list: " + s);
  return out;
}

std::vector<long long> parse_ll_list(const std::string& s) {
  std::vector<long long> out;
  for (const std::string& part : mrdp::split(s, ',')) {
    std::string t = mrdp::trim(part);
    if (t.empty()) continue;
    try {
      out.push_back(std::stoll(t));
    } catch (const std::logic_error&) {
      throw mrdp::IoError("bad integer list: " + s);
    }
  }
  if (out.empty()) throw mrdp::IoError("empty list: " + s);
  return out;
}

// CSV tensor: # comments, comma and newline separated doubles, quantized to
// the declaration's fixed-point format. The word count must match exactly.
std::vector<int64_t> load_csv_tensor(const std::string& path, const mrdp::TensorDecl& d) {
  std::vector<int64_t> out;
  for (const std::string& raw : mrdp::split(mrdp::read_file(path), '\n')) {
    std::string line = mrdp::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    for (const std::string& tok : mrdp::split(line, ',')) {
      std::string t = mrdp::trim(tok);
      if (t.empty()) continue;
      try {
        out.push_back(mrdp::fx_quantize(std::stod(t), d.format()));
      } catch (const std::logic_error&) {
        throw mrdp::IoError(path + ": bad number: " + t);
      }
    }
  }
  if (static_cast<int64_t>(out.size()) != d.words())
    throw mrdp::IoError(path + ": expected " + std::to_string(d.words()) + " values for " +
                        d.name + ", got " + std::to_string(out.size()));
  return out;
}

// ACL file: one rule per line, ten integers forming five value/mask pairs
// over src_ip dst_ip src_port dst_port proto. 0x hex accepted.
std::vector<mrdp::AclRule> load_acl(const std::string& path) {
  std::vector<mrdp::AclRule> rules;
  for (const std::string& raw : mrdp::split(mrdp::read_file(path), '\n')) {
    std::string line = mrdp::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::vector<uint64_t> nums;
    std::string tok;
    while (is >> tok) {
      try {
        nums.push_back(std::stoull(tok, nullptr, 0));
      } catch (const std::logic_error&) {
        throw mrdp::IoError(path + ": bad integer: " + tok);
      }
    }
    if (nums.size() != 10)
      throw mrdp::IoError(path + ": an acl rule needs 10 integers (5 value/mask pairs)");
    mrdp::AclRule r;
    for (int i = 0; i < 5; ++i) {
      r.value.push_back(nums[2 * i]);
      r.mask.push_back(nums[2 * i + 1]);
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

struct SourceBundle {
  std::string src;
  mrdp::CompileOptions opts;
};

// A catalog benchmark keeps its shipped options; a file starts from defaults.
SourceBundle resolve_source(const std::string& file, const std::string& bench) {
  if (!bench.empty()) {
    const mrdp::BenchmarkSpec& spec = mrdp::benchmark(bench);
    return {spec.source, spec.options};
  }
  return {mrdp::read_file(file), mrdp::CompileOptions{}};
}

// ---------------------------------------------------------------------------
// compile
// ---------------------------------------------------------------------------

struct CompileArgs {
  std::string program, bench, fabric = "default", out_dir;
  int unroll = -1;  // -1 keeps the source default
  int rows = 0, cols = 0;
  uint64_t seed = 1;
  bool mapping = false;
};

int run_compile(const CompileArgs& a) {
  if (a.program.empty() == a.bench.empty()) {
    std::cerr << "compile: give exactly one of PROGRAM or --bench\n";
    return 1;
  }
  SourceBundle sb = resolve_source(a.program, a.bench);
  if (a.fabric != "default") sb.opts.fabric = load_fabric(a.fabric);
  if (a.unroll >= 0) sb.opts.default_unroll = a.unroll;
  if (a.rows > 0) sb.opts.fabric.rows = a.rows;
  if (a.cols > 0) sb.opts.fabric.cols = a.cols;

  RunConfig rc;
  rc.subcommand = "compile";
  rc.seed = a.seed;
  rc.program_path = a.bench.empty() ? a.program : "bench:" + a.bench;
  rc.fabric_path = a.fabric;
  rc.out_dir = a.out_dir;
  rc.note("unroll", static_cast<long long>(sb.opts.default_unroll));
  rc.note("grid", std::to_string(sb.opts.fabric.rows) + "x" +
                      std::to_string(sb.opts.fabric.cols));
  rc.note("precision", sb.opts.fabric.precision);

  mrdp::Program p = mrdp::parse_program(sb.src);
  mrdp::validate(p);
  mrdp::Module m = mrdp::compile(p, sb.opts);

  Sink sink(a.out_dir, rc);
  sink.put("report.txt", m.perf.to_kv());
  if (a.mapping) sink.put("mapping.txt", mrdp::mapping_to_text(m));
  sink.finish();
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimArgs {
  std::string program, bench, weights, trace, acl, out_dir;
  long packets = 1024;
  int flows = 4;
  int64_t gap_ns = 1000;
  uint64_t seed = 1;
  bool bypass = false;
  double threshold = 0.5, hysteresis = 0.0, floor = 0.0;
  long timeout = 1, window = 1024, lru = 4096;
  double base_latency_ns = 1000.0;
  int score_word = 0;
};

int run_simulate(const SimArgs& a) {
  if (a.program.empty() == a.bench.empty()) {
    std::cerr << "simulate: give exactly one of PROGRAM or --bench\n";
    return 1;
  }
  SourceBundle sb = resolve_source(a.program, a.bench);
  mrdp::Program p = mrdp::parse_program(sb.src);
  mrdp::validate(p);
  mrdp::Module m = mrdp::compile(p, sb.opts);

  mrdp::PipelineConfig cfg;
  long arity = mrdp::feature_arity(m);
  std::vector<std::string> feat;
  for (long i = 0; i < arity; ++i) feat.push_back("f" + std::to_string(i));
  cfg.layout = mrdp::PhvLayout::make(feat, feat);
  cfg.use_model = !a.bypass;
  cfg.model = m;
  cfg.luts = mrdp::LutSet::standard(m.fmt);
  if (!a.weights.empty()) {
    for (const auto& d : p.decls)
      if (d.kind == mrdp::TensorKind::Weights)
        cfg.weights[d.name] = load_csv_tensor(a.weights + "/" + d.load_path, d);
  } else {
    auto tensors = mrdp::synth_tensors(p, a.seed);
    for (const auto& d : p.decls)
      if (d.kind == mrdp::TensorKind::Weights) cfg.weights[d.name] = tensors.at(d.name);
  }
  cfg.guards.threshold = a.threshold;
  cfg.guards.hysteresis_delta = a.hysteresis;
  cfg.guards.decision_timeout_pkts = a.timeout;
  cfg.guards.min_bandwidth_frac = a.floor;
  cfg.guards.window = a.window;
  cfg.guards.lru_flows = a.lru;
  if (!a.acl.empty()) cfg.guards.acl = load_acl(a.acl);
  cfg.base_latency_ns = a.base_latency_ns;
  cfg.score_word = a.score_word;

  std::vector<mrdp::PacketRecord> trace;
  const bool synthetic = a.trace.empty();
  if (synthetic) {
    mrdp::TraceSynth ts;
    ts.packets = a.packets;
    ts.flows = a.flows;
    ts.gap_ns = a.gap_ns;
    ts.extras = feat;
    ts.lo = m.fmt.min_raw();
    ts.hi = m.fmt.max_raw();
    ts.seed = a.seed;
    trace = mrdp::synth_trace(ts);
  } else {
    trace = mrdp::parse_trace(mrdp::read_file(a.trace));
  }

  RunConfig rc;
  rc.subcommand = "simulate";
  rc.seed = a.seed;
  rc.program_path = a.bench.empty() ? a.program : "bench:" + a.bench;
  rc.weights_path = a.weights;
  rc.trace_path = synthetic ? "synthetic" : a.trace;
  rc.out_dir = a.out_dir;
  rc.note("packets", static_cast<long long>(trace.size()));
  if (synthetic) {
    rc.note("flows", static_cast<long long>(a.flows));
    rc.note("gap_ns", static_cast<long long>(a.gap_ns));
  }
  rc.note("bypass", a.bypass ? "1" : "0");
  rc.note("threshold", a.threshold);
  rc.note("hysteresis", a.hysteresis);
  rc.note("timeout", static_cast<long long>(a.timeout));
  rc.note("floor", a.floor);
  rc.note("window", static_cast<long long>(a.window));
  if (!a.acl.empty()) rc.note("acl_rules", static_cast<long long>(cfg.guards.acl.size()));
  rc.note("base_latency_ns", a.base_latency_ns);

  mrdp::PipelineResult res = mrdp::run_pipeline(trace, cfg);
  const mrdp::PipelineStats& st = res.stats;
  std::ostringstream os;
  os << "#mrdp-stats v1\n";
  os << "packets = " << st.packets << "\n";
  os << "benign = " << st.benign << "\n";
  os << "anomalous = " << st.anomalous << "\n";
  os << "acl_hits = " << st.acl_hits << "\n";
  os << "ml_flags = " << st.ml_flags << "\n";
  os << "rate_limited = " << st.rate_limited << "\n";
  os << "inferred = " << st.inferred << "\n";
  os << "forced_departures = " << st.forced_departures << "\n";
  os << "base_latency_ns = " << mrdp::format_fixed(st.base_latency_ns, 3) << "\n";
  os << "infer_latency_ns = " << mrdp::format_fixed(st.infer_latency_ns, 3) << "\n";
  os << "mean_latency_ns = " << mrdp::format_fixed(st.mean_latency_ns, 3) << "\n";
  os << "added_latency_frac = " << mrdp::format_fixed(st.added_latency_frac, 6) << "\n";

  Sink sink(a.out_dir, rc);
  sink.put("stats.txt", os.str());
  if (sink.wants_files()) {
    sink.put("decisions.txt", mrdp::format_decisions(res.decisions));
    if (synthetic) sink.put("trace.txt", mrdp::format_trace(trace));
  }
  sink.finish();
  return 0;
}

// ---------------------------------------------------------------------------
// analyze cache | fct | tables, and the report bundle
// ---------------------------------------------------------------------------

struct CacheArgs {
  long flows = 1000;
  std::string dist = "pareto";
  long long size_min = 1, size_cap = 1000000;
  double shape = 1.2;
  std::string fields = "0..8", entropy = "0,8,16";
  uint64_t seed = 1;
  int jobs = 1;
  std::string out_dir;
};

int run_cache(const CacheArgs& a) {
  mrdp::FlowModel fm;
  fm.flow_size_dist = a.dist;
  fm.pareto_shape = a.shape;
  fm.size_min = a.size_min;
  fm.size_cap = a.size_cap;
  fm.n_flows = a.flows;
  fm.rng_seed = a.seed;

  RunConfig rc;
  rc.subcommand = "analyze-cache";
  rc.seed = a.seed;
  rc.out_dir = a.out_dir;
  rc.note("flows", static_cast<long long>(a.flows));
  rc.note("dist", a.dist);
  rc.note("fields", a.fields);
  rc.note("entropy", a.entropy);
  rc.note("jobs", static_cast<long long>(a.jobs));

  std::string csv =
      mrdp::cache_curve_csv(fm, parse_int_list(a.fields), parse_double_list(a.entropy), a.jobs);
  Sink sink(a.out_dir, rc);
  sink.put("cache_curve.csv", csv);
  sink.finish();
  return 0;
}

struct FctArgs {
  std::string sizes = "1,10,100,1000,10000";
  int fields = 8;
  double entropy = 16.0;
  long flows = 1000;
  double install_ms = 3.0, infer_ms = 0.67, switch_ns = 188.0;
  double link_gbps = 100.0, pkt_bytes = 1250.0, base_us = 1.0;
  uint64_t seed = 1;
  int jobs = 1;
  std::string out_dir;
};

int run_fct(const FctArgs& a) {
  mrdp::FlowModel fm;
  fm.unstable_fields = a.fields;
  fm.field_entropy_bits = a.entropy;
  fm.n_flows = a.flows;
  fm.rng_seed = a.seed;
  mrdp::LatencyConstants lc;
  lc.rule_install_ms = a.install_ms;
  lc.cpu_infer_ms = a.infer_ms;
  lc.switch_infer_ns = a.switch_ns;
  lc.link_gbps = a.link_gbps;
  lc.pkt_bytes = a.pkt_bytes;
  lc.switch_base_latency_us = a.base_us;

  RunConfig rc;
  rc.subcommand = "analyze-fct";
  rc.seed = a.seed;
  rc.out_dir = a.out_dir;
  rc.note("sizes", a.sizes);
  rc.note("fields", static_cast<long long>(a.fields));
  rc.note("entropy", a.entropy);
  rc.note("install_ms", a.install_ms);
  rc.note("infer_ms", a.infer_ms);
  rc.note("jobs", static_cast<long long>(a.jobs));

  std::vector<long long> sizes = parse_ll_list(a.sizes);
  std::string csv = mrdp::fct_curve_csv(fm, lc, sizes, a.jobs);

  // Ratio table: long flows (>= 1e4 packets) must show the >= 1000x gap.
  std::ostringstream os;
  os << "#mrdp-fct v1\n";
  os << "size caching_ms dataplane_ms ratio flag\n";
  for (long long n : sizes) {
    double c = mrdp::flow_completion_ms(fm, lc, mrdp::FctScheme::Caching, 0, n);
    double d = mrdp::flow_completion_ms(fm, lc, mrdp::FctScheme::Dataplane, 0, n);
    double ratio = c / d;
    bool ok = n < 10000 || ratio >= 1000.0;
    os << n << " " << mrdp::format_fixed(c, 4) << " " << mrdp::format_fixed(d, 4) << " "
       << mrdp::format_fixed(ratio, 2) << " " << (ok ? "ok" : "DEVIATION") << "\n";
  }

  Sink sink(a.out_dir, rc);
  sink.put("fct.txt", os.str());
  sink.put("fct_curve.csv", csv);
  sink.finish();
  return 0;
}

struct TablesArgs {
  int jobs = 1;
  double latency_band = mrdp::kLatencyBand;
  double area_band = mrdp::kAreaBand;
  double power_ceiling = mrdp::kPowerCeiling;
  bool csv = false, strict = false;
  uint64_t seed = 1;
  std::string out_dir;
};

void note_bands(RunConfig& rc, const TablesArgs& a) {
  rc.note("latency_band", a.latency_band);
  rc.note("area_band", a.area_band);
  rc.note("power_ceiling", a.power_ceiling);
  rc.note("jobs", static_cast<long long>(a.jobs));
}

int run_tables(const TablesArgs& a) {
  mrdp::ToleranceBands tb{a.latency_band, a.area_band, a.power_ceiling};
  mrdp::SuiteReport rep = mrdp::report_tables(mrdp::benchmark_catalog(), tb, a.jobs);

  RunConfig rc;
  rc.subcommand = "analyze-tables";
  rc.seed = a.seed;
  rc.out_dir = a.out_dir;
  note_bands(rc, a);

  Sink sink(a.out_dir, rc);
  sink.put("tables.txt", mrdp::report_to_text(rep));
  if (a.csv) sink.put("tables.csv", mrdp::report_to_csv(rep));
  sink.finish();
  if (!rep.all_ok()) {
    std::cerr << "tables: DEVIATION rows present\n";
    if (a.strict) return 3;
  }
  return 0;
}

int run_report(const TablesArgs& a) {
  mrdp::ToleranceBands tb{a.latency_band, a.area_band, a.power_ceiling};
  mrdp::SuiteReport rep = mrdp::report_tables(mrdp::benchmark_catalog(), tb, a.jobs);

  RunConfig rc;
  rc.subcommand = "report";
  rc.seed = a.seed;
  rc.out_dir = a.out_dir;
  note_bands(rc, a);

  mrdp::FlowModel cache_fm;
  cache_fm.rng_seed = a.seed;
  std::vector<int> fields = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> entropies = {0.0, 2.0, 4.0, 8.0, 16.0};

  mrdp::FlowModel fct_fm;
  fct_fm.unstable_fields = 8;
  fct_fm.field_entropy_bits = 16.0;
  fct_fm.rng_seed = a.seed;
  mrdp::LatencyConstants lc;
  std::vector<long long> sizes = {1, 10, 100, 1000, 10000};

  Sink sink(a.out_dir, rc);
  sink.put("tables.txt", mrdp::report_to_text(rep));
  sink.put("tables.csv", mrdp::report_to_csv(rep));
  sink.put("cache_curve.csv", mrdp::cache_curve_csv(cache_fm, fields, entropies, a.jobs));
  sink.put("fct_curve.csv", mrdp::fct_curve_csv(fct_fm, lc, sizes, a.jobs));
  sink.finish();
  std::cout << (rep.all_ok() ? "report: all rows ok\n" : "report: DEVIATION rows present\n");
  if (a.strict && !rep.all_ok()) return 3;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrdp: a software model of an ML-capable switch data plane"};
  app.set_version_flag("--version", "mrdp 1.0.0");
  app.set_config("--config", "", "key=value config file ([subcommand] sections)");
  app.require_subcommand(0, 1);

  // Forces catalog construction before any worker threads exist.
  std::vector<std::string> bench_names;
  for (const auto& s : mrdp::benchmark_catalog()) bench_names.push_back(s.name);

  CompileArgs ca;
  CLI::App* c = app.add_subcommand("compile", "compile a program, print its report");
  c->add_option("program", ca.program, "program source file (.mr)");
  c->add_option("--bench", ca.bench, "catalog benchmark instead of a file")
      ->check(CLI::IsMember(bench_names));
  c->add_option("--fabric", ca.fabric, "fabric config file, or 'default'");
  c->add_option("--unroll", ca.unroll, "default unroll degree (0 = fully spatial)");
  c->add_option("--rows", ca.rows, "override fabric rows");
  c->add_option("--cols", ca.cols, "override fabric cols");
  c->add_option("--seed", ca.seed, "seed recorded in artifacts");
  c->add_option("--out-dir", ca.out_dir, "write artifacts here instead of stdout");
  c->add_flag("--mapping", ca.mapping, "also emit the placed mapping");

  SimArgs sa;
  CLI::App* s = app.add_subcommand("simulate", "replay or synthesize a trace");
  s->add_option("program", sa.program, "program source file (.mr)");
  s->add_option("--bench", sa.bench, "catalog benchmark instead of a file")
      ->check(CLI::IsMember(bench_names));
  s->add_option("--weights", sa.weights, "directory with the load() csv files")
      ->check(CLI::ExistingDirectory);
  s->add_option("--trace", sa.trace, "input trace file (#mrdp-trace v1)")
      ->check(CLI::ExistingFile);
  s->add_option("--packets", sa.packets, "synthetic trace length");
  s->add_option("--flows", sa.flows, "synthetic flow count");
  s->add_option("--gap-ns", sa.gap_ns, "synthetic inter-arrival gap");
  s->add_option("--seed", sa.seed, "trace and weight synthesis seed");
  s->add_flag("--bypass", sa.bypass, "skip inference, baseline switch only");
  s->add_option("--threshold", sa.threshold, "anomaly score boundary");
  s->add_option("--hysteresis", sa.hysteresis, "decision flip margin");
  s->add_option("--timeout", sa.timeout, "minimum packets per decision");
  s->add_option("--floor", sa.floor, "per-flow bandwidth floor fraction");
  s->add_option("--window", sa.window, "floor accounting window");
  s->add_option("--lru", sa.lru, "tracked flow state bound");
  s->add_option("--acl", sa.acl, "deny rules file")->check(CLI::ExistingFile);
  s->add_option("--base-latency-ns", sa.base_latency_ns, "baseline switch latency");
  s->add_option("--score-word", sa.score_word, "output word used as the score");
  s->add_option("--out-dir", sa.out_dir, "write stats, decisions and trace here");

  CLI::App* an = app.add_subcommand("analyze", "studies: cache, fct, tables");
  an->require_subcommand(1);

  CacheArgs cca;
  CLI::App* an_cache = an->add_subcommand("cache", "miss-rate curves");
  an_cache->add_option("--flows", cca.flows, "flows in the traffic model");
  an_cache->add_option("--dist", cca.dist, "flow size distribution")
      ->check(CLI::IsMember({"pareto", "fixed"}));
  an_cache->add_option("--size-min", cca.size_min, "minimum flow size");
  an_cache->add_option("--size-cap", cca.size_cap, "maximum flow size");
  an_cache->add_option("--shape", cca.shape, "pareto shape");
  an_cache->add_option("--fields", cca.fields, "unstable field counts, e.g. 0..8");
  an_cache->add_option("--entropy", cca.entropy, "entropy bits per series, e.g. 0,8,16");
  an_cache->add_option("--seed", cca.seed, "traffic seed");
  an_cache->add_option("--jobs", cca.jobs, "parallel study points");
  an_cache->add_option("--out-dir", cca.out_dir, "write csv here instead of stdout");

  FctArgs fa;
  CLI::App* an_fct = an->add_subcommand("fct", "flow completion time curves");
  an_fct->add_option("--sizes", fa.sizes, "flow sizes in packets");
  an_fct->add_option("--fields", fa.fields, "unstable fields per packet");
  an_fct->add_option("--entropy", fa.entropy, "entropy bits per field");
  an_fct->add_option("--flows", fa.flows, "flows in the traffic model");
  an_fct->add_option("--install-ms", fa.install_ms, "rule install time");
  an_fct->add_option("--infer-ms", fa.infer_ms, "control-plane inference time");
  an_fct->add_option("--switch-ns", fa.switch_ns, "in-switch inference time");
  an_fct->add_option("--link-gbps", fa.link_gbps, "bottleneck link rate");
  an_fct->add_option("--pkt-bytes", fa.pkt_bytes, "nominal packet size");
  an_fct->add_option("--base-us", fa.base_us, "baseline switch latency");
  an_fct->add_option("--seed", fa.seed, "traffic seed");
  an_fct->add_option("--jobs", fa.jobs, "parallel study points");
  an_fct->add_option("--out-dir", fa.out_dir, "write csv here instead of stdout");

  TablesArgs ta;
  CLI::App* an_tab = an->add_subcommand("tables", "reference table analogs");
  an_tab->add_option("--jobs", ta.jobs, "parallel benchmark compiles");
  an_tab->add_option("--latency-band", ta.latency_band, "latency tolerance fraction");
  an_tab->add_option("--area-band", ta.area_band, "area tolerance fraction");
  an_tab->add_option("--power-ceiling", ta.power_ceiling, "power ceiling factor");
  an_tab->add_flag("--csv", ta.csv, "also emit the long-form csv");
  an_tab->add_flag("--strict", ta.strict, "exit nonzero on any DEVIATION row");
  an_tab->add_option("--seed", ta.seed, "seed recorded in artifacts");
  an_tab->add_option("--out-dir", ta.out_dir, "write artifacts here instead of stdout");

  TablesArgs ra;
  ra.out_dir = "runs/report";
  CLI::App* rep = app.add_subcommand("report", "full bundle: tables plus study curves");
  rep->add_option("--jobs", ra.jobs, "parallel benchmark compiles and study points");
  rep->add_option("--latency-band", ra.latency_band, "latency tolerance fraction");
  rep->add_option("--area-band", ra.area_band, "area tolerance fraction");
  rep->add_option("--power-ceiling", ra.power_ceiling, "power ceiling factor");
  rep->add_flag("--strict", ra.strict, "exit nonzero on any DEVIATION row");
  rep->add_option("--seed", ra.seed, "study seed");
  rep->add_option("--out-dir", ra.out_dir, "run directory for the bundle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 1;
  }

  try {
    if (c->parsed()) return run_compile(ca);
    if (s->parsed()) return run_simulate(sa);
    if (an_cache->parsed()) return run_cache(cca);
    if (an_fct->parsed()) return run_fct(fa);
    if (an_tab->parsed()) return run_tables(ta);
    if (rep->parsed()) return run_report(ra);
  } catch (const mrdp::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mrdp::ValidateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mrdp::CompileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

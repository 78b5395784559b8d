// mrdp - map-reduce data plane model - fabric configuration and cost model
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>

#include "mrdp/common.hpp"
#include "mrdp/fixpoint.hpp"

namespace mrdp {

// Per-precision functional unit costs (area in um^2, power in uW). These are
// the synthesis anchors the whole area/power model hangs off.
struct FuCost {
  int64_t area_um2;
  double power_uw;
};

inline FuCost fu_cost(FixedFormat f) {
  if (f == kFix8) return {3877, 223.0};
  if (f == kFix16) return {8108, 393.0};
  if (f == kFix32) return {20203, 759.0};
  throw Error("no cost entry for format " + format_name(f));
}

// A compute grid of alternating compute and memory units on a checkerboard:
// cell (r, c) is a memory unit when r + c is even, a compute unit otherwise.
// One bidirectional stream port sits just west of cell (0, 0), at column -1.
struct FabricConfig {
  int rows = 8;
  int cols = 16;
  int lanes = 16;           // SIMD lanes per compute unit
  int stages = 2;           // pipelined ALU rows per compute unit
  std::string precision = "fix8";
  double clock_ghz = 1.0;
  int mu_banks = 16;        // memory unit banks, 2 reads/bank/cycle
  int64_t mu_capacity = 4096;  // words per memory unit
  double mu_area_mm2 = 0.06;

  // Calibrated model constants. link_area covers a stream route's switches
  // and FIFOs; movement_cycles is the per-hop traversal cost. Both were fit
  // once against the 16-wide perceptron reference point and then frozen.
  double link_area_mm2 = 0.198645333333333;
  double movement_cycles = 2.75;

  // Structural limits used by the compiler.
  int max_tail_ops = 2;          // scalar ops fused after a reduce tree
  int scalar_block_max_ops = 16; // ops per scalar epilogue unit
  int mu_max_consumers = 4;      // compute units adjacent to one memory unit

  FixedFormat format() const { return format_from_name(precision); }

  bool is_mu_cell(int r, int c) const { return ((r + c) & 1) == 0; }

  int cu_cells() const {
    int n = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        if (!is_mu_cell(r, c)) ++n;
    return n;
  }

  int mu_cells() const { return rows * cols - cu_cells(); }

  // Compute unit area in integer um^2: lanes * stages ALUs of the configured
  // precision. fix8 at 16x2 is exactly 124064 um^2.
  int64_t cu_area_um2() const { return int64_t(lanes) * stages * fu_cost(format()).area_um2; }
  double cu_area_mm2() const { return static_cast<double>(cu_area_um2()) * 1e-6; }
  double cu_power_mw() const { return lanes * stages * fu_cost(format()).power_uw * 1e-3; }

  // Uniform power density (mW per mm^2) derived from the compute unit ratio.
  double power_density() const { return cu_power_mw() / cu_area_mm2(); }

  int reduce_tree_cycles() const {
    int c = 0;
    for (int l = 1; l < lanes; l <<= 1) ++c;
    return c;
  }

  std::string to_kv() const {
    std::ostringstream os;
    os << "#mrdp-fabric v1\n";
    os << "rows = " << rows << "\n";
    os << "cols = " << cols << "\n";
    os << "lanes = " << lanes << "\n";
    os << "stages = " << stages << "\n";
    os << "precision = " << precision << "\n";
    os << "clock_ghz = " << format_fixed(clock_ghz, 6) << "\n";
    os << "mu_banks = " << mu_banks << "\n";
    os << "mu_capacity = " << mu_capacity << "\n";
    os << "mu_area_mm2 = " << format_fixed(mu_area_mm2, 9) << "\n";
    os << "link_area_mm2 = " << format_fixed(link_area_mm2, 9) << "\n";
    os << "movement_cycles = " << format_fixed(movement_cycles, 6) << "\n";
    os << "max_tail_ops = " << max_tail_ops << "\n";
    os << "scalar_block_max_ops = " << scalar_block_max_ops << "\n";
    os << "mu_max_consumers = " << mu_max_consumers << "\n";
    return os.str();
  }

  static FabricConfig from_kv(const std::string& text) {
    FabricConfig f;
    bool saw_header = false;
    for (const std::string& raw : split(text, '\n')) {
      std::string line = trim(raw);
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (starts_with(line, "#mrdp-fabric")) saw_header = true;
        continue;
      }
      size_t eq = line.find('=');
      if (eq == std::string::npos) throw IoError("bad fabric config line: " + line);
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      f.set(key, val);
    }
    if (!saw_header) throw IoError("missing #mrdp-fabric header");
    return f;
  }

  void set(const std::string& key, const std::string& val) {
    try {
      if (key == "rows") rows = std::stoi(val);
      else if (key == "cols") cols = std::stoi(val);
      else if (key == "lanes") lanes = std::stoi(val);
      else if (key == "stages") stages = std::stoi(val);
      else if (key == "precision") precision = val;
      else if (key == "clock_ghz") clock_ghz = std::stod(val);
      else if (key == "mu_banks") mu_banks = std::stoi(val);
      else if (key == "mu_capacity") mu_capacity = std::stoll(val);
      else if (key == "mu_area_mm2") mu_area_mm2 = std::stod(val);
      else if (key == "link_area_mm2") link_area_mm2 = std::stod(val);
      else if (key == "movement_cycles") movement_cycles = std::stod(val);
      else if (key == "max_tail_ops") max_tail_ops = std::stoi(val);
      else if (key == "scalar_block_max_ops") scalar_block_max_ops = std::stoi(val);
      else if (key == "mu_max_consumers") mu_max_consumers = std::stoi(val);
      else throw IoError("unknown fabric config key: " + key);
    } catch (const std::invalid_argument&) {
      throw IoError("bad value for " + key + ": " + val);
    }
  }

  void check() const {
    if (rows < 1 || cols < 2) throw Error("fabric needs at least 1x2 cells");
    if (lanes < 1 || (lanes & (lanes - 1)) != 0) throw Error("lanes must be a power of two");
    if (stages < 1) throw Error("stages must be positive");
    if (clock_ghz <= 0) throw Error("clock must be positive");
    format();  // throws on bad precision
  }
};

// Grid coordinates. The port is the single stream entry/exit point.
struct Coord {
  int row = 0;
  int col = 0;
  bool operator==(const Coord&) const = default;
};

inline Coord port_coord() { return {0, -1}; }

inline int manhattan(Coord a, Coord b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

// Deterministic placement scan for compute cells: 4-row bands, and inside a
// band column pairs left to right, rows top to bottom. Keeps small graphs
// packed near the port while letting large ones spill rightwards and then
// into the next band.
inline std::vector<Coord> cu_slot_order(const FabricConfig& f) {
  std::vector<Coord> slots;
  int band_h = std::min(4, f.rows);
  for (int band = 0; band * band_h < f.rows; ++band) {
    for (int pair = 0; 2 * pair < f.cols; ++pair) {
      for (int r_off = 0; r_off < band_h; ++r_off) {
        int r = band * band_h + r_off;
        if (r >= f.rows) break;
        for (int c : {2 * pair, 2 * pair + 1}) {
          if (c < f.cols && !f.is_mu_cell(r, c)) slots.push_back({r, c});
        }
      }
    }
  }
  return slots;
}

// Memory cells in row-major order (used for tie breaking).
inline std::vector<Coord> mu_cell_order(const FabricConfig& f) {
  std::vector<Coord> cells;
  for (int r = 0; r < f.rows; ++r)
    for (int c = 0; c < f.cols; ++c)
      if (f.is_mu_cell(r, c)) cells.push_back({r, c});
  return cells;
}

}  // namespace mrdp

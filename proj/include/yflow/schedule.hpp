/* Copyright 2026 The YFlow Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "yflow/ir.hpp"
#include "yflow/model.hpp"

namespace yflow {

// Fixed anchoring variables. Stash variables are numbered from kFirstStash.
inline constexpr int kVarIn = 0;   // input load, OS product scratch
inline constexpr int kVarWgt = 1;  // weight load
inline constexpr int kVarAcc = 2;  // OS accumulator, IS/WS product scratch
inline constexpr int kFirstStash = 3;

struct GenOptions {
  bool rotation = true;  // false: row-major stash slots with VMOV shifting (test mode)
  int unroll_cap = 64;   // larger rotation periods fall back to VMOV shifting
};

/// One (output, filter position) pair an input element contributes to.
struct Assoc {
  int oh = 0, ow = 0;  // output coordinate
  int r = 0, sc = 0;   // filter coordinate

  friend bool operator==(const Assoc&, const Assoc&) = default;
};

/// Every (output, weight) pair reading input (h, w), in descending output order.
inline std::vector<Assoc> assoc_idx(int h, int w, const LayerConfig& layer) {
  const auto od = output_dims(layer);
  if (h < 0 || h >= layer.ih || w < 0 || w >= layer.iw)
    detail::fail("assoc_idx: input (", h, ",", w, ") out of range");
  std::vector<Assoc> out;
  for (int oh = od.oh - 1; oh >= 0; --oh) {
    const int r = h + layer.pad - oh * layer.s;
    if (r < 0 || r >= layer.fh) continue;
    for (int ow = od.ow - 1; ow >= 0; --ow) {
      const int sc = w + layer.pad - ow * layer.s;
      if (sc < 0 || sc >= layer.fw) continue;
      out.push_back({oh, ow, r, sc});
    }
  }
  return out;
}

/// Per-row variable counts of the first `n` row-major filter positions.
inline std::vector<int> stash_rows(const LayerConfig& layer, int n) {
  std::vector<int> rows(layer.fh, 0);
  n = std::clamp(n, 0, filter_positions(layer));
  for (int q = 0; q < n; ++q) ++rows[q / layer.fw];
  return rows;
}

inline int rotation_period(const std::vector<int>& vars_per_row, int stride) {
  std::int64_t period = 1;
  for (int m : vars_per_row)
    if (m > stride) period = std::lcm(period, static_cast<std::int64_t>(m));
  return static_cast<int>(period);
}

/// Stash-slot sequences for each secondary-unrolled iteration. Entry [un][q] is the
/// slot holding the q-th stashed window position (row-major) in iteration un.
inline std::vector<std::vector<int>> alloc_rotation(const std::vector<int>& vars_per_row,
                                                    int stride) {
  if (vars_per_row.empty()) detail::fail("alloc_rotation needs at least one row");
  if (stride < 1) detail::fail("stride must be >= 1");
  const int period = rotation_period(vars_per_row, stride);
  std::vector<std::vector<int>> seqs(period);
  for (int un = 0; un < period; ++un) {
    int base = 0;
    for (int m : vars_per_row) {
      for (int j = 0; j < m; ++j)
        seqs[un].push_back(base + (m > stride ? (j + un * stride) % m : j));
      base += m;
    }
  }
  return seqs;
}

inline int secondary_unroll_factor(const LayerConfig& layer, int num_in_stash, int stride) {
  if (num_in_stash < 0) detail::fail("stash size must be >= 0");
  return rotation_period(stash_rows(layer, num_in_stash), stride);
}

namespace detail {

class Builder {
public:
  Builder(const LayerConfig& layer, const VectorMachineConfig& vmc, const DataflowSpec& spec) {
    layer.validate();
    vmc.validate();
    spec.validate(vmc);
    ir_.meta.layer = layer;
    ir_.meta.vmc = vmc;
    ir_.meta.spec = spec;
    od_ = output_dims(layer);
  }

  ScheduleMeta& meta() { return ir_.meta; }
  const OutputDims& od() const { return od_; }
  ScheduleIR take() { return std::move(ir_); }

  // Flat input index of output (oh, ow) at filter (r, sc), or -1 when padded.
  std::int64_t input_at(int oh, int ow, int r, int sc) const {
    const auto& l = ir_.meta.layer;
    const int h = oh * l.s + r - l.pad, w = ow * l.s + sc - l.pad;
    if (h < 0 || h >= l.ih || w < 0 || w >= l.iw) return -1;
    return static_cast<std::int64_t>(h) * l.iw + w;
  }
  std::int64_t out_at(int oh, int ow) const { return static_cast<std::int64_t>(oh) * od_.ow + ow; }

  void load(int v, DataKind k, std::int64_t idx, bool fill = false) {
    push({Opcode::vload, v, -1, -1, k, idx, fill});
  }
  void zero(int v) { push({Opcode::vzero, v}); }
  void mul(int d, int a, int b) { push({Opcode::vmul, d, a, b}); }
  void add(int d, int a, int b) { push({Opcode::vadd, d, a, b}); }
  void mov(int d, int a) { push({Opcode::vmov, d, a}); }
  void redsum(int sreg, int v) { push({Opcode::vredsum, sreg, v}); }
  void sacc(std::int64_t idx, int sreg, bool drain = false) {
    push({Opcode::sacc, -1, sreg, -1, DataKind::output, idx, drain});
  }
  void elide() { ++ir_.meta.elided_loads; }

private:
  void push(const Instr& in) { ir_.instrs.push_back(in); }
  ScheduleIR ir_;
  OutputDims od_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Basic dataflows: three vector variables, literal loop nests.
// ---------------------------------------------------------------------------

inline ScheduleIR gen_basic(Anchor anchor, const LayerConfig& layer,
                            const VectorMachineConfig& vmc) {
  DataflowSpec spec;
  spec.anchor = anchor;
  detail::Builder b(layer, vmc, spec);
  const auto od = b.od();
  const int fh = layer.fh, fw = layer.fw;

  if (anchor == Anchor::os) {
    for (int oh = 0; oh < od.oh; ++oh)
      for (int ow = 0; ow < od.ow; ++ow) {
        b.zero(kVarAcc);
        for (int r = 0; r < fh; ++r)
          for (int sc = 0; sc < fw; ++sc) {
            const auto in = b.input_at(oh, ow, r, sc);
            if (in < 0) {
              b.elide();
              continue;
            }
            b.load(kVarIn, DataKind::input, in);
            b.load(kVarWgt, DataKind::weight, r * fw + sc);
            b.mul(kVarIn, kVarIn, kVarWgt);
            b.add(kVarAcc, kVarAcc, kVarIn);
          }
        b.redsum(0, kVarAcc);
        b.sacc(b.out_at(oh, ow), 0);
      }
  } else if (anchor == Anchor::ws) {
    for (int r = 0; r < fh; ++r)
      for (int sc = 0; sc < fw; ++sc) {
        b.load(kVarWgt, DataKind::weight, r * fw + sc);
        for (int oh = 0; oh < od.oh; ++oh)
          for (int ow = 0; ow < od.ow; ++ow) {
            const auto in = b.input_at(oh, ow, r, sc);
            if (in < 0) {
              b.elide();
              continue;
            }
            b.load(kVarIn, DataKind::input, in);
            b.mul(kVarAcc, kVarIn, kVarWgt);
            b.redsum(0, kVarAcc);
            b.sacc(b.out_at(oh, ow), 0);
          }
      }
  } else {
    for (int h = 0; h < layer.ih; ++h)
      for (int w = 0; w < layer.iw; ++w) {
        const auto pairs = assoc_idx(h, w, layer);
        if (pairs.empty()) continue;
        b.load(kVarIn, DataKind::input, static_cast<std::int64_t>(h) * layer.iw + w);
        for (const Assoc& a : pairs) {
          b.load(kVarWgt, DataKind::weight, a.r * fw + a.sc);
          b.mul(kVarAcc, kVarIn, kVarWgt);
          b.redsum(0, kVarAcc);
          b.sacc(b.out_at(a.oh, a.ow), 0);
        }
      }
  }
  return b.take();
}

// ---------------------------------------------------------------------------
// Extended dataflows
// ---------------------------------------------------------------------------

/// Output anchoring with weight and input stashes. Weights stash the first
/// filter positions for the whole tile; inputs stash the first window positions
/// and slide along each output row, loading new columns over consumed slots.
inline ScheduleIR gen_extended_os(const LayerConfig& layer, const VectorMachineConfig& vmc,
                                  int num_in_stash, int num_wgt_stash, GenOptions opt = {}) {
  DataflowSpec spec;
  spec.anchor = Anchor::os;
  spec.aux_input_vars = num_in_stash;
  spec.aux_weight_vars = num_wgt_stash;
  spec.priority = {DataKind::weight, DataKind::input};
  detail::Builder b(layer, vmc, spec);
  const auto od = b.od();
  const int fh = layer.fh, fw = layer.fw, s = layer.s, F = fh * fw;
  const int nw = std::min(num_wgt_stash, F), ni = std::min(num_in_stash, F);

  const std::vector<int> m = stash_rows(layer, ni);
  std::vector<int> row_base(fh, kFirstStash + nw);
  for (int r = 1; r < fh; ++r) row_base[r] = row_base[r - 1] + m[r - 1];

  const int period = rotation_period(m, s);
  const bool rotate = opt.rotation && period <= opt.unroll_cap;
  auto& meta = b.meta();
  meta.stash_weight = nw;
  meta.stash_input = ni;
  meta.rotation = rotate;
  meta.vmov_fallback = opt.rotation && !rotate;
  meta.unroll = rotate ? period : 1;

  auto slot = [&](int r, int j, int ow) {
    return row_base[r] + (rotate && m[r] > s ? (j + ow * s) % m[r] : j);
  };

  for (int p = 0; p < nw; ++p) b.load(kFirstStash + p, DataKind::weight, p, true);

  for (int oh = 0; oh < od.oh; ++oh)
    for (int ow = 0; ow < od.ow; ++ow) {
      b.zero(kVarAcc);
      for (int r = 0; r < fh; ++r) {
        const int mr = m[r];
        if (mr == 0) continue;
        const bool slides = ow > 0 && mr > s;
        if (slides && !rotate)
          for (int j = 0; j + s < mr; ++j)
            if (b.input_at(oh, ow, r, j) >= 0) b.mov(slot(r, j, ow), slot(r, j + s, ow));
        for (int j = slides ? mr - s : 0; j < mr; ++j) {
          const auto in = b.input_at(oh, ow, r, j);
          if (in < 0) {
            b.elide();
            continue;
          }
          b.load(slot(r, j, ow), DataKind::input, in, ow == 0);
        }
      }
      for (int r = 0; r < fh; ++r)
        for (int sc = 0; sc < fw; ++sc) {
          const int q = r * fw + sc;
          const bool stashed_in = sc < m[r];
          const auto in = b.input_at(oh, ow, r, sc);
          if (in < 0) {
            if (!stashed_in) b.elide();
            continue;
          }
          int vi = kVarIn;
          if (stashed_in)
            vi = slot(r, sc, ow);
          else
            b.load(kVarIn, DataKind::input, in);
          int vw = kVarWgt;
          if (q < nw)
            vw = kFirstStash + q;
          else
            b.load(kVarWgt, DataKind::weight, q);
          b.mul(kVarIn, vi, vw);
          b.add(kVarAcc, kVarAcc, kVarIn);
        }
      b.redsum(0, kVarAcc);
      b.sacc(b.out_at(oh, ow), 0);
    }
  return b.take();
}

/// Weight anchoring with input and output stashes. Stashed outputs accumulate
/// across all weight passes and are reduced once in the last pass; stashed inputs
/// are the earliest used input positions.
inline ScheduleIR gen_extended_ws(const LayerConfig& layer, const VectorMachineConfig& vmc,
                                  int num_in_stash, int num_out_stash, GenOptions = {}) {
  DataflowSpec spec;
  spec.anchor = Anchor::ws;
  spec.aux_input_vars = num_in_stash;
  spec.aux_output_vars = num_out_stash;
  spec.priority = {DataKind::output, DataKind::input};
  detail::Builder b(layer, vmc, spec);
  const auto od = b.od();
  const int fh = layer.fh, fw = layer.fw, F = fh * fw;
  const std::int64_t E = static_cast<std::int64_t>(od.oh) * od.ow;

  std::vector<char> used(static_cast<std::size_t>(layer.ih) * layer.iw, 0);
  for (int oh = 0; oh < od.oh; ++oh)
    for (int ow = 0; ow < od.ow; ++ow)
      for (int r = 0; r < fh; ++r)
        for (int sc = 0; sc < fw; ++sc)
          if (auto in = b.input_at(oh, ow, r, sc); in >= 0) used[in] = 1;

  const int no = static_cast<int>(std::min<std::int64_t>(num_out_stash, E));
  std::map<std::int64_t, int> in_var;
  for (std::size_t i = 0; i < used.size() && static_cast<int>(in_var.size()) < num_in_stash; ++i)
    if (used[i]) in_var.emplace(static_cast<std::int64_t>(i),
                     kFirstStash + no + static_cast<int>(in_var.size()));

  auto& meta = b.meta();
  meta.stash_output = no;
  meta.stash_input = static_cast<int>(in_var.size());

  for (int e = 0; e < no; ++e) b.zero(kFirstStash + e);
  for (const auto& [idx, v] : in_var) b.load(v, DataKind::input, idx, true);

  for (int f = 0; f < F; ++f) {
    const int r = f / fw, sc = f % fw;
    b.load(kVarWgt, DataKind::weight, f);
    for (int oh = 0; oh < od.oh; ++oh)
      for (int ow = 0; ow < od.ow; ++ow) {
        const auto e = b.out_at(oh, ow);
        const bool stashed_out = e < no;
        const auto in = b.input_at(oh, ow, r, sc);
        if (in < 0) {
          b.elide();
        } else {
          int vi = kVarIn;
          if (auto it = in_var.find(in); it != in_var.end())
            vi = it->second;
          else
            b.load(kVarIn, DataKind::input, in);
          b.mul(kVarAcc, vi, kVarWgt);
          if (stashed_out) {
            const int vo = kFirstStash + static_cast<int>(e);
            b.add(vo, vo, kVarAcc);
          } else {
            b.redsum(0, kVarAcc);
            b.sacc(e, 0);
          }
        }
        if (stashed_out && f == F - 1) {  // split last pass: write back
          b.redsum(0, kFirstStash + static_cast<int>(e));
          b.sacc(e, 0, true);
        }
      }
  }
  return b.take();
}

/// Input anchoring with weight and output stashes. Output stash variables are
/// pooled per filter row; a stashed output accumulates its consecutive
/// contributions from one input row and is written back at its last one.
inline ScheduleIR gen_extended_is(const LayerConfig& layer, const VectorMachineConfig& vmc,
                                  int num_wgt_stash, int num_out_stash, GenOptions = {}) {
  DataflowSpec spec;
  spec.anchor = Anchor::is;
  spec.aux_weight_vars = num_wgt_stash;
  spec.aux_output_vars = num_out_stash;
  spec.priority = {DataKind::weight, DataKind::output};
  detail::Builder b(layer, vmc, spec);
  const int fh = layer.fh, fw = layer.fw, F = fh * fw;
  const int nw = std::min(num_wgt_stash, F), no = std::min(num_out_stash, F);
  const std::vector<int> m = stash_rows(layer, no);

  std::vector<std::deque<int>> pool(fh);
  for (int r = 0, v = kFirstStash + nw; r < fh; ++r)
    for (int j = 0; j < m[r]; ++j) pool[r].push_back(v++);

  auto& meta = b.meta();
  meta.stash_weight = nw;
  meta.stash_output = no;
  meta.unroll = layer.s == 1 ? rotation_period(m, 0) : 1;

  for (int p = 0; p < nw; ++p) b.load(kFirstStash + p, DataKind::weight, p, true);

  std::map<std::pair<std::int64_t, int>, int> live;  // (output, filter row) -> var
  for (int h = 0; h < layer.ih; ++h)
    for (int w = 0; w < layer.iw; ++w) {
      const auto pairs = assoc_idx(h, w, layer);
      if (pairs.empty()) continue;
      b.load(kVarIn, DataKind::input, static_cast<std::int64_t>(h) * layer.iw + w);
      for (const Assoc& a : pairs) {
        const int q = a.r * fw + a.sc;
        int vw = kVarWgt;
        if (q < nw)
          vw = kFirstStash + q;
        else
          b.load(kVarWgt, DataKind::weight, q);
        const auto e = b.out_at(a.oh, a.ow);
        if (a.sc >= m[a.r]) {
          b.mul(kVarAcc, kVarIn, vw);
          b.redsum(0, kVarAcc);
          b.sacc(e, 0);
          continue;
        }
        const auto key = std::make_pair(e, a.r);
        int vo;
        if (auto it = live.find(key); it != live.end()) {
          vo = it->second;
          b.mul(kVarAcc, kVarIn, vw);
          b.add(vo, vo, kVarAcc);
        } else {
          if (pool[a.r].empty()) throw std::logic_error("output stash pool exhausted");
          vo = pool[a.r].front();
          pool[a.r].pop_front();
          live.emplace(key, vo);
          b.mul(vo, kVarIn, vw);
        }
        if (a.sc + 1 >= m[a.r] || w + 1 >= layer.iw) {
          b.redsum(0, vo);
          b.sacc(e, 0, true);
          pool[a.r].push_back(vo);
          live.erase(key);
        }
      }
    }
  return b.take();
}

// ---------------------------------------------------------------------------
// Binary lowering and dispatch
// ---------------------------------------------------------------------------

/// Rewrites every VMUL as the XOR/popcount pair used for +-1 arithmetic.
inline ScheduleIR lower_binary(const ScheduleIR& ir) {
  ScheduleIR out;
  out.meta = ir.meta;
  out.meta.mode = Mode::binary;
  out.instrs.reserve(ir.instrs.size() + ir.instrs.size() / 4);
  for (const Instr& in : ir.instrs) {
    if (in.op != Opcode::vmul) {
      out.instrs.push_back(in);
      continue;
    }
    out.instrs.push_back({Opcode::vxor, in.dst, in.a, in.b});
    out.instrs.push_back({Opcode::vpopcnt, in.dst, in.dst});
  }
  return out;
}

/// Schedules `layer` under `spec`. Zero stash counts give the basic dataflow.
inline ScheduleIR generate(const LayerConfig& layer, const VectorMachineConfig& vmc,
                           const DataflowSpec& spec, Mode mode = Mode::int8,
                           GenOptions opt = {}) {
  layer.validate();
  vmc.validate();
  spec.validate(vmc);
  if (mode == Mode::binary && vmc.elem_bits != 1)
    detail::fail("binary mode needs elem_bits = 1, got ", vmc.elem_bits);
  if (mode == Mode::binary && layer.ic % vmc.lanes() != 0)
    detail::fail("binary mode needs ic (", layer.ic, ") to be a multiple of x (", vmc.lanes(),
                 ")");
  ScheduleIR ir;
  switch (spec.anchor) {
    case Anchor::os:
      ir = gen_extended_os(layer, vmc, spec.aux_input_vars, spec.aux_weight_vars, opt);
      break;
    case Anchor::ws:
      ir = gen_extended_ws(layer, vmc, spec.aux_input_vars, spec.aux_output_vars, opt);
      break;
    case Anchor::is:
      ir = gen_extended_is(layer, vmc, spec.aux_weight_vars, spec.aux_output_vars, opt);
      break;
  }
  ir.meta.spec = spec;
  return mode == Mode::binary ? lower_binary(ir) : ir;
}

}  // namespace yflow

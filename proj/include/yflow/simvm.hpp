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

#include <array>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "yflow/ir.hpp"
#include "yflow/model.hpp"

namespace yflow {

/// Raised when an IR cannot be executed; the message names the instruction.
class execution_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Instruction tallies. Fill loads and drains are included in the plain totals
/// and additionally tallied on their own so steady-state traffic can be derived.
struct Counts {
  std::int64_t vector_loads = 0;
  std::int64_t stash_fill_loads = 0;
  std::int64_t elided_loads = 0;
  std::int64_t scalar_reads = 0;
  std::int64_t scalar_writes = 0;
  std::int64_t vzero = 0;
  std::int64_t vmul = 0;
  std::int64_t vadd = 0;
  std::int64_t vxor = 0;
  std::int64_t vpopcnt = 0;
  std::int64_t vredsum = 0;
  std::int64_t vmov = 0;
  std::int64_t sacc = 0;
  std::int64_t stash_drains = 0;

  std::int64_t memory_reads() const { return vector_loads + scalar_reads; }
  std::int64_t memory_writes() const { return scalar_writes; }
  std::int64_t steady_reads() const {
    return vector_loads - stash_fill_loads + scalar_reads - stash_drains;
  }
  std::int64_t steady_writes() const { return scalar_writes - stash_drains; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("vector_loads", vector_loads);
    fn("stash_fill_loads", stash_fill_loads);
    fn("elided_loads", elided_loads);
    fn("scalar_reads", scalar_reads);
    fn("scalar_writes", scalar_writes);
    fn("vzero", vzero);
    fn("vmul", vmul);
    fn("vadd", vadd);
    fn("vxor", vxor);
    fn("vpopcnt", vpopcnt);
    fn("vredsum", vredsum);
    fn("vmov", vmov);
    fn("sacc", sacc);
    fn("stash_drains", stash_drains);
  }

  Counts scaled(std::int64_t k) const {
    Counts c = *this;
    for (auto* f : c.fields()) *f *= k;
    return c;
  }

  friend bool operator==(const Counts&, const Counts&) = default;

private:
  std::array<std::int64_t*, 14> fields() {
    return {&vector_loads, &stash_fill_loads, &elided_loads, &scalar_reads, &scalar_writes,
            &vzero,        &vmul,             &vadd,         &vxor,         &vpopcnt,
            &vredsum,      &vmov,             &sacc,         &stash_drains};
  }
  friend Counts diff_counts(const Counts&, const Counts&);
};

inline Counts diff_counts(const Counts& a, const Counts& b) {
  Counts d = a, bb = b;
  auto fd = d.fields();
  auto fb = bb.fields();
  for (std::size_t i = 0; i < fd.size(); ++i) *fd[i] -= *fb[i];
  return d;
}

struct CostReport {
  Counts tile;   // one (channel block, kernel) tile
  Counts layer;  // whole layer
  int peak_live_vars = 0;

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// Categorical difference a - b, for both views.
inline CostReport diff_reports(const CostReport& a, const CostReport& b) {
  return {diff_counts(a.tile, b.tile), diff_counts(a.layer, b.layer),
          a.peak_live_vars - b.peak_live_vars};
}

inline std::string to_csv(const CostReport& rep) {
  std::ostringstream os;
  os << "category,count\n";
  rep.layer.for_each([&](const char* name, std::int64_t v) { os << name << ',' << v << '\n'; });
  rep.tile.for_each([&](const char* name, std::int64_t v) { os << "tile." << name << ',' << v << '\n'; });
  os << "peak_live_vars," << rep.peak_live_vars << '\n';
  return os.str();
}

namespace detail {

inline std::string where(std::size_t pos, const Instr& in) {
  return concat("instruction ", pos, " (", format_instr(in), ")");
}

inline void tally(Counts& c, const Instr& in) {
  switch (in.op) {
    case Opcode::vload:
      ++c.vector_loads;
      if (in.stash) ++c.stash_fill_loads;
      break;
    case Opcode::vzero: ++c.vzero; break;
    case Opcode::vmul: ++c.vmul; break;
    case Opcode::vadd: ++c.vadd; break;
    case Opcode::vxor: ++c.vxor; break;
    case Opcode::vpopcnt: ++c.vpopcnt; break;
    case Opcode::vredsum: ++c.vredsum; break;
    case Opcode::vmov: ++c.vmov; break;
    case Opcode::sacc:
      ++c.sacc;
      ++c.scalar_reads;
      ++c.scalar_writes;
      if (in.stash) ++c.stash_drains;
      break;
  }
}

inline std::vector<int> vector_uses(const Instr& in) {
  switch (in.op) {
    case Opcode::vmul:
    case Opcode::vadd:
    case Opcode::vxor: return {in.a, in.b};
    case Opcode::vpopcnt:
    case Opcode::vmov:
    case Opcode::vredsum: return {in.a};
    default: return {};
  }
}

inline int vector_def(const Instr& in) {
  switch (in.op) {
    case Opcode::vredsum:
    case Opcode::sacc: return -1;
    default: return in.dst;
  }
}

}  // namespace detail

/// Most vector variables simultaneously holding a value that is still needed,
/// counting a freshly written variable at its defining instruction.
inline int peak_live_vars(const ScheduleIR& ir) {
  std::vector<char> live(64, 0);
  int n_live = 0, peak = 0;
  auto set = [&](int v, bool on) {
    if (v < 0) return;
    if (static_cast<std::size_t>(v) >= live.size()) live.resize(v + 1, 0);
    if (static_cast<bool>(live[v]) != on) {
      live[v] = on;
      n_live += on ? 1 : -1;
    }
  };
  for (auto it = ir.instrs.rbegin(); it != ir.instrs.rend(); ++it) {
    const int def = detail::vector_def(*it);
    set(def, true);
    peak = std::max(peak, n_live);
    set(def, false);
    for (int u : detail::vector_uses(*it)) set(u, true);
    peak = std::max(peak, n_live);
  }
  return peak;
}

/// Static instruction counts, without executing anything.
inline CostReport measure(const ScheduleIR& ir) {
  CostReport rep;
  for (const Instr& in : ir.instrs) detail::tally(rep.tile, in);
  rep.tile.elided_loads = ir.meta.elided_loads;
  rep.layer = rep.tile.scaled(ir.tile_repeat());
  rep.peak_live_vars = peak_live_vars(ir);
  return rep;
}

struct ExecResult {
  PackedTensor output;  // KHW_scalar {oc, oh, ow}
  CostReport report;
};

/// Runs `ir` over every (channel block, kernel) tile. Inputs are NCHW[xc] and
/// weights CKRS[xc] for the IR's lane count. In binary mode each lane holds one
/// bit, 0 meaning +1 and 1 meaning -1.
inline ExecResult execute(const ScheduleIR& ir, const PackedTensor& input,
                          const PackedTensor& weights, Mode mode) {
  const auto& m = ir.meta;
  const auto& l = m.layer;
  l.validate();
  m.vmc.validate();
  if (mode != m.mode)
    detail::fail("IR was generated for ", to_string(m.mode), " mode, not ", to_string(mode));
  const int x = m.vmc.lanes();
  const auto od = output_dims(l);
  const std::int64_t E = static_cast<std::int64_t>(od.oh) * od.ow;
  const std::int64_t HW = static_cast<std::int64_t>(l.ih) * l.iw;
  const int F = filter_positions(l);
  const int CB = static_cast<int>(channel_blocks(l, m.vmc));
  const int nvar = m.vmc.num_var_available();

  if (input.layout != Layout::nchw_xc || input.dims != std::vector<int>{CB, l.ih, l.iw, x})
    detail::fail("input must be NCHW[xc] with dims {", CB, ",", l.ih, ",", l.iw, ",", x, "}");
  if (weights.layout != Layout::ckrs_xc ||
      weights.dims != std::vector<int>{CB, l.oc, l.fh, l.fw, x})
    detail::fail("weights must be CKRS[xc] with dims {", CB, ",", l.oc, ",", l.fh, ",", l.fw, ",",
                 x, "}");
  input.check();
  weights.check();

  ExecResult res;
  res.output = {DataKind::output, Layout::khw_scalar, {l.oc, od.oh, od.ow}, {}};
  res.output.data.assign(res.output.expected_size(), 0);

  // Validate operands once; the instruction list is identical for every tile.
  for (std::size_t pos = 0; pos < ir.instrs.size(); ++pos) {
    const Instr& in = ir.instrs[pos];
    auto check_var = [&](int v) {
      if (v < 0 || v >= nvar)
        throw execution_error(detail::concat(detail::where(pos, in), ": variable v", v,
                                             " outside the ", nvar, " available"));
    };
    if (detail::vector_def(in) >= 0 || in.op == Opcode::vzero) check_var(in.dst);
    for (int u : detail::vector_uses(in)) check_var(u);
    if ((in.op == Opcode::vredsum && in.dst < 0) || (in.op == Opcode::sacc && in.a < 0))
      throw execution_error(detail::where(pos, in) + ": bad scalar register");
    if (in.op == Opcode::vmul && mode == Mode::binary)
      throw execution_error(detail::where(pos, in) + ": VMUL in binary mode");
    if ((in.op == Opcode::vxor || in.op == Opcode::vpopcnt) && mode == Mode::int8)
      throw execution_error(detail::where(pos, in) + ": XOR/popcount in int8 mode");
    std::int64_t limit = in.op == Opcode::sacc ? E : in.tensor == DataKind::weight ? F : HW;
    if ((in.op == Opcode::vload || in.op == Opcode::sacc) && (in.index < 0 || in.index >= limit))
      throw execution_error(detail::concat(detail::where(pos, in), ": index ", in.index,
                                           " outside [0, ", limit, ")"));
  }

  std::vector<std::vector<std::int64_t>> vars(nvar, std::vector<std::int64_t>(x, 0));
  std::vector<char> written(nvar, 0);
  std::vector<std::int64_t> sregs;
  std::vector<char> swritten;

  for (int cb = 0; cb < CB; ++cb)
    for (int k = 0; k < l.oc; ++k) {
      std::fill(written.begin(), written.end(), 0);
      std::fill(swritten.begin(), swritten.end(), 0);
      const std::int64_t in_base = cb * HW;
      const std::int64_t w_base = (static_cast<std::int64_t>(cb) * l.oc + k) * F;
      const std::int64_t out_base = k * E;
      for (std::size_t pos = 0; pos < ir.instrs.size(); ++pos) {
        const Instr& in = ir.instrs[pos];
        auto src = [&](int v) -> std::vector<std::int64_t>& {
          if (!written[v])
            throw execution_error(detail::concat(detail::where(pos, in), " at tile (cb=", cb,
                                                 ",k=", k, "): read of unwritten variable v", v));
          return vars[v];
        };
        detail::tally(res.report.layer, in);
        switch (in.op) {
          case Opcode::vload: {
            const auto& t = in.tensor == DataKind::weight ? weights : input;
            const std::int64_t base = (in.tensor == DataKind::weight ? w_base : in_base) + in.index;
            for (int i = 0; i < x; ++i) vars[in.dst][i] = t.data[base * x + i];
            written[in.dst] = 1;
            break;
          }
          case Opcode::vzero:
            std::fill(vars[in.dst].begin(), vars[in.dst].end(), 0);
            written[in.dst] = 1;
            break;
          case Opcode::vmul:
          case Opcode::vadd:
          case Opcode::vxor: {
            const auto& a = src(in.a);  // lane-wise, so aliasing dst is fine
            const auto& b = src(in.b);
            auto& d = vars[in.dst];
            for (int i = 0; i < x; ++i)
              d[i] = in.op == Opcode::vmul ? a[i] * b[i]
                     : in.op == Opcode::vadd ? a[i] + b[i]
                                             : (a[i] ^ b[i]) & 1;
            written[in.dst] = 1;
            break;
          }
          case Opcode::vpopcnt: {
            // Each lane holds one XOR bit; its +-1 product is 1 - 2*popcount.
            const auto& a = src(in.a);
            for (int i = 0; i < x; ++i) vars[in.dst][i] = 1 - 2 * (a[i] & 1);
            written[in.dst] = 1;
            break;
          }
          case Opcode::vmov:
            vars[in.dst] = src(in.a);
            written[in.dst] = 1;
            break;
          case Opcode::vredsum: {
            std::int64_t sum = 0;
            for (std::int64_t v : src(in.a)) sum += v;
            if (static_cast<std::size_t>(in.dst) >= sregs.size()) {
              sregs.resize(in.dst + 1, 0);
              swritten.resize(in.dst + 1, 0);
            }
            sregs[in.dst] = sum;
            swritten[in.dst] = 1;
            break;
          }
          case Opcode::sacc:
            if (static_cast<std::size_t>(in.a) >= sregs.size() || !swritten[in.a])
              throw execution_error(detail::concat(detail::where(pos, in),
                                                   ": read of unwritten scalar s", in.a));
            res.output.data[out_base + in.index] += sregs[in.a];
            break;
        }
      }
    }

  const CostReport stat = measure(ir);
  res.report.tile = stat.tile;
  res.report.layer.elided_loads = stat.layer.elided_loads;
  res.report.peak_live_vars = stat.peak_live_vars;
  if (res.report.peak_live_vars > nvar)
    throw execution_error(detail::concat("peak of ", res.report.peak_live_vars,
                                         " live variables exceeds ", nvar));
  return res;
}

// ---------------------------------------------------------------------------
// Reference convolution
// ---------------------------------------------------------------------------

/// Direct convolution of an NCHW input {ic, ih, iw} with unblocked CKRS weights
/// {ic, oc, fh, fw}; returns NCHW {oc, oh, ow}. Binary operands are bits with
/// 0 meaning +1; each MAC adds +1 when the bits agree and -1 otherwise.
inline PackedTensor scalar_oracle(const LayerConfig& layer, const PackedTensor& input,
                                  const PackedTensor& weights, Mode mode) {
  const auto od = output_dims(layer);
  if (input.dims != std::vector<int>{layer.ic, layer.ih, layer.iw})
    detail::fail("oracle input dims do not match the layer");
  if (weights.dims != std::vector<int>{layer.ic, layer.oc, layer.fh, layer.fw})
    detail::fail("oracle weight dims do not match the layer");
  input.check();
  weights.check();
  PackedTensor out = make_nchw(DataKind::output, layer.oc, od.oh, od.ow);
  for (int k = 0; k < layer.oc; ++k)
    for (int oh = 0; oh < od.oh; ++oh)
      for (int ow = 0; ow < od.ow; ++ow) {
        std::int64_t acc = 0;
        for (int c = 0; c < layer.ic; ++c)
          for (int r = 0; r < layer.fh; ++r)
            for (int sc = 0; sc < layer.fw; ++sc) {
              const int h = oh * layer.s + r - layer.pad, w = ow * layer.s + sc - layer.pad;
              if (h < 0 || h >= layer.ih || w < 0 || w >= layer.iw) continue;
              const auto a = input.data[(static_cast<std::size_t>(c) * layer.ih + h) * layer.iw + w];
              const auto b = weights.data[((static_cast<std::size_t>(c) * layer.oc + k) * layer.fh +
                                           r) * layer.fw + sc];
              if (mode == Mode::int8)
                acc += a * b;
              else
                acc += a == b ? 1 : -1;
            }
        out.data[(static_cast<std::size_t>(k) * od.oh + oh) * od.ow + ow] = acc;
      }
  return out;
}

struct LayerTensors {
  PackedTensor input;    // NCHW
  PackedTensor weights;  // CKRS
};

/// Seeded random operands: int8 values in [-128, 127], or bits in binary mode.
inline LayerTensors random_tensors(const LayerConfig& layer, Mode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(mode == Mode::int8 ? -128 : 0,
                                          mode == Mode::int8 ? 127 : 1);
  LayerTensors t{make_nchw(DataKind::input, layer.ic, layer.ih, layer.iw),
                 make_ckrs(layer.ic, layer.oc, layer.fh, layer.fw)};
  for (auto& v : t.input.data) v = dist(rng);
  for (auto& v : t.weights.data) v = dist(rng);
  return t;
}

struct Verdict {
  bool pass = true;
  std::string detail;  // first mismatch, when any
  CostReport report;
};

/// Executes `ir` on seeded random tensors and compares with the oracle.
inline Verdict verify(const ScheduleIR& ir, std::uint64_t seed) {
  const auto& l = ir.meta.layer;
  const auto t = random_tensors(l, ir.meta.mode, seed);
  const int x = ir.meta.vmc.lanes();
  const auto res = execute(ir, pack(t.input, x), pack_weights(t.weights, x), ir.meta.mode);
  const auto ref = scalar_oracle(l, t.input, t.weights, ir.meta.mode);
  Verdict v;
  v.report = res.report;
  const auto od = output_dims(l);
  for (std::size_t i = 0; i < ref.data.size(); ++i)
    if (ref.data[i] != res.output.data[i]) {
      const auto k = i / (static_cast<std::size_t>(od.oh) * od.ow);
      const auto rem = i % (static_cast<std::size_t>(od.oh) * od.ow);
      v.pass = false;
      v.detail = detail::concat("output (k=", k, ",h=", rem / od.ow, ",w=", rem % od.ow,
                                ") expected ", ref.data[i], " got ", res.output.data[i]);
      break;
    }
  return v;
}

}  // namespace yflow

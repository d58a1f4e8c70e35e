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
#include <cctype>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "yflow/ir.hpp"
#include "yflow/model.hpp"

namespace yflow {

enum class Flavor { neon_c, scalar_c };

inline std::string_view to_string(Flavor f) { return f == Flavor::neon_c ? "neon_c" : "scalar_c"; }

struct EmitConfig {
  Flavor flavor = Flavor::neon_c;
  std::string function_name = "yflow_kernel";
  std::string include_guard;  // derived from the function name when empty
  Mode mode = Mode::int8;
};

// Emitted kernels take raw packed arrays:
//   int8:   const int8_t* input (NCHW[xc]), const int8_t* weight (CKRS[xc])
//   binary: const uint8_t* input/weight, one bit per lane, lane i of the flat
//           element index e stored in byte e/8, bit e%8
// and write int32_t* output (KHW). The output is cleared on entry.

namespace detail {

inline std::string guard_for(const EmitConfig& cfg) {
  if (!cfg.include_guard.empty()) return cfg.include_guard;
  std::string g;
  for (char c : cfg.function_name)
    g += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
  return g + "_H_";
}

inline void check_ident(const std::string& name) {
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0])) ||
      !std::all_of(name.begin(), name.end(),
                   [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }))
    fail("'", name, "' is not a C identifier");
}

inline std::string signature(const EmitConfig& cfg) {
  const char* elem = cfg.mode == Mode::int8 ? "int8_t" : "uint8_t";
  return concat("void ", cfg.function_name, "(const ", elem, "* input, const ", elem,
                "* weight, int32_t* output)");
}

struct Shape {
  std::int64_t CB, OC, HW, F, E, X;
};

inline Shape shape_of(const LayerConfig& l, const VectorMachineConfig& vmc) {
  return {channel_blocks(l, vmc), l.oc, static_cast<std::int64_t>(l.ih) * l.iw,
          filter_positions(l), output_elements(l), vmc.lanes()};
}

inline void open_file(std::ostringstream& os, const EmitConfig& cfg, const std::string& what) {
  const auto guard = guard_for(cfg);
  os << "/* " << cfg.function_name << ": " << what << ". Generated by yflow. */\n";
  os << "#ifndef " << guard << "\n#define " << guard << "\n\n";
}

inline void close_file(std::ostringstream& os, const EmitConfig& cfg) {
  os << "\n#endif  /* " << guard_for(cfg) << " */\n";
}

inline void open_tile_loops(std::ostringstream& os, const Shape& sh, bool binary) {
  os << "  for (int i = 0; i < " << sh.OC * sh.E << "; ++i) output[i] = 0;\n";
  os << "  for (int cb = 0; cb < " << sh.CB << "; ++cb) {\n";
  os << "    for (int k = 0; k < " << sh.OC << "; ++k) {\n";
  // Element offsets of this tile; binary arrays are addressed in bits.
  os << "      const long in_base = (long)cb * " << sh.HW * sh.X << ";\n";
  os << "      const long wt_base = ((long)cb * " << sh.OC << " + k) * " << sh.F * sh.X << ";\n";
  os << "      int32_t* out = output + (long)k * " << sh.E << ";\n";
  if (binary) os << "      (void)in_base; (void)wt_base;\n";
}

inline void close_tile_loops(std::ostringstream& os) { os << "    }\n  }\n}\n"; }

inline std::set<int> vars_used(const ScheduleIR& ir) {
  std::set<int> ids;
  for (const Instr& in : ir.instrs) {
    if (in.op != Opcode::vredsum && in.op != Opcode::sacc) ids.insert(in.dst);
    if (in.op != Opcode::vload && in.op != Opcode::vzero && in.op != Opcode::sacc)
      ids.insert(in.a);
    if (in.op == Opcode::vmul || in.op == Opcode::vadd || in.op == Opcode::vxor) ids.insert(in.b);
  }
  return ids;
}

inline void check_opcode(const Instr& in, Mode mode, std::size_t pos) {
  const bool binary_op = in.op == Opcode::vxor || in.op == Opcode::vpopcnt;
  if ((mode == Mode::int8 && binary_op) || (mode == Mode::binary && in.op == Opcode::vmul))
    fail("instruction ", pos, " (", format_instr(in), ") is not supported in ", to_string(mode),
         " mode");
}

inline std::string src_ptr(const Instr& in) {
  return in.tensor == DataKind::weight ? "weight" : "input";
}

inline std::string base_of(const Instr& in) {
  return in.tensor == DataKind::weight ? "wt_base" : "in_base";
}

// ---- NEON flavor ----------------------------------------------------------

inline void emit_neon_body(std::ostringstream& os, const ScheduleIR& ir, const Shape& sh) {
  const bool binary = ir.meta.mode == Mode::binary;
  const std::int64_t K = sh.X / (binary ? 128 : 16);  // 128-bit registers per variable
  const std::int64_t bytes = binary ? sh.X / 8 : sh.X;
  std::vector<std::int64_t> macs(ir.meta.vmc.num_var_available(), 0);

  for (int v : vars_used(ir)) os << "      yf_vec v" << v << ";\n";
  os << "      int32_t s0;\n";
  for (std::size_t pos = 0; pos < ir.instrs.size(); ++pos) {
    const Instr& in = ir.instrs[pos];
    check_opcode(in, ir.meta.mode, pos);
    if (in.op == Opcode::vredsum && in.dst != 0)
      fail("instruction ", pos, ": neon_c supports scalar register s0 only");
    const std::string d = concat("v", in.dst), a = concat("v", in.a), b = concat("v", in.b);
    switch (in.op) {
      case Opcode::vload: {
        const std::string off = binary ? concat("(", base_of(in), " / 8) + ", in.index * bytes)
                                       : concat(base_of(in), " + ", in.index * sh.X);
        for (std::int64_t i = 0; i < K; ++i)
          os << "      " << d << ".b[" << i << "] = vld1q_" << (binary ? "u8" : "s8") << "("
             << src_ptr(in) << " + " << off << " + " << 16 * i << ");\n";
        break;
      }
      case Opcode::vzero:
        if (binary) {
          for (std::int64_t i = 0; i < K; ++i) os << "      " << d << ".b[" << i << "] = vdupq_n_u8(0);\n";
          macs[in.dst] = 0;
        } else {
          for (std::int64_t i = 0; i < 2 * K; ++i)
            os << "      " << d << ".a[" << i << "] = vdupq_n_s32(0);\n";
        }
        break;
      case Opcode::vmul:
        for (std::int64_t i = 0; i < K; ++i) {
          os << "      " << d << ".a[" << 2 * i << "] = vpaddlq_s16(vmull_s8(vget_low_s8(" << a
             << ".b[" << i << "]), vget_low_s8(" << b << ".b[" << i << "])));\n";
          os << "      " << d << ".a[" << 2 * i + 1 << "] = vpaddlq_s16(vmull_high_s8(" << a
             << ".b[" << i << "], " << b << ".b[" << i << "]));\n";
        }
        break;
      case Opcode::vxor:
        for (std::int64_t i = 0; i < K; ++i)
          os << "      " << d << ".b[" << i << "] = veorq_u8(" << a << ".b[" << i << "], " << b
             << ".b[" << i << "]);\n";
        break;
      case Opcode::vpopcnt:
        for (std::int64_t i = 0; i < K; ++i)
          os << "      " << d << ".b[" << i << "] = vcntq_u8(" << a << ".b[" << i << "]);\n";
        macs[in.dst] = 1;
        break;
      case Opcode::vadd:
        if (binary) {
          // Per-byte popcounts reach 8 per MAC; 31 MACs still fit in a uint8 lane.
          const auto total = macs[in.a] + macs[in.b];
          if (total > 31)
            fail("instruction ", pos, ": ", total, " accumulated XOR/popcount terms overflow uint8");
          for (std::int64_t i = 0; i < K; ++i)
            os << "      " << d << ".b[" << i << "] = vaddq_u8(" << a << ".b[" << i << "], " << b
               << ".b[" << i << "]);\n";
          macs[in.dst] = total;
        } else {
          for (std::int64_t i = 0; i < 2 * K; ++i)
            os << "      " << d << ".a[" << i << "] = vaddq_s32(" << a << ".a[" << i << "], " << b
               << ".a[" << i << "]);\n";
        }
        break;
      case Opcode::vmov:
        os << "      " << d << " = " << a << ";\n";
        if (binary) macs[in.dst] = macs[in.a];
        break;
      case Opcode::vredsum:
        if (binary) {
          os << "      s0 = " << macs[in.a] * sh.X << " - 2 * (int32_t)(";
          for (std::int64_t i = 0; i < K; ++i)
            os << (i ? " + " : "") << "vaddlvq_u8(" << a << ".b[" << i << "])";
          os << ");\n";
        } else {
          os << "      s0 = ";
          for (std::int64_t i = 0; i < 2 * K; ++i)
            os << (i ? " + " : "") << "vaddvq_s32(" << a << ".a[" << i << "])";
          os << ";\n";
        }
        break;
      case Opcode::sacc:
        if (in.a != 0) fail("instruction ", pos, ": neon_c supports scalar register s0 only");
        os << "      out[" << in.index << "] += s0;\n";
        break;
    }
  }
}

// ---- scalar flavor --------------------------------------------------------

inline void emit_scalar_body(std::ostringstream& os, const ScheduleIR& ir, const Shape& sh) {
  const bool binary = ir.meta.mode == Mode::binary;
  const auto X = sh.X;
  for (int v : vars_used(ir)) os << "      int32_t v" << v << "[" << X << "];\n";
  os << "      int32_t s0;\n";
  auto lanes = [&](const std::string& stmt) {
    os << "      for (int l = 0; l < " << X << "; ++l) " << stmt << ";\n";
  };
  for (std::size_t pos = 0; pos < ir.instrs.size(); ++pos) {
    const Instr& in = ir.instrs[pos];
    check_opcode(in, ir.meta.mode, pos);
    if (in.op == Opcode::vredsum && in.dst != 0)
      fail("instruction ", pos, ": scalar_c supports scalar register s0 only");
    const std::string d = concat("v", in.dst), a = concat("v", in.a), b = concat("v", in.b);
    switch (in.op) {
      case Opcode::vload: {
        const std::string e = concat(base_of(in), " + ", in.index * X, " + l");
        if (binary)
          lanes(concat(d, "[l] = (", src_ptr(in), "[(", e, ") / 8] >> ((", e, ") % 8)) & 1"));
        else
          lanes(concat(d, "[l] = ", src_ptr(in), "[", e, "]"));
        break;
      }
      case Opcode::vzero: lanes(d + "[l] = 0"); break;
      case Opcode::vmul: lanes(concat(d, "[l] = ", a, "[l] * ", b, "[l]")); break;
      case Opcode::vadd: lanes(concat(d, "[l] = ", a, "[l] + ", b, "[l]")); break;
      case Opcode::vxor: lanes(concat(d, "[l] = ", a, "[l] ^ ", b, "[l]")); break;
      case Opcode::vpopcnt: lanes(concat(d, "[l] = 1 - 2 * ", a, "[l]")); break;
      case Opcode::vmov: lanes(concat(d, "[l] = ", a, "[l]")); break;
      case Opcode::vredsum:
        os << "      s0 = 0;\n";
        lanes(concat("s0 += ", a, "[l]"));
        break;
      case Opcode::sacc:
        if (in.a != 0) fail("instruction ", pos, ": scalar_c supports scalar register s0 only");
        os << "      out[" << in.index << "] += s0;\n";
        break;
    }
  }
}

}  // namespace detail

/// C source for `ir`. Output depends only on (ir, cfg).
inline std::string emit(const ScheduleIR& ir, const EmitConfig& cfg) {
  detail::check_ident(cfg.function_name);
  if (cfg.mode != ir.meta.mode)
    detail::fail("emit config mode ", to_string(cfg.mode), " differs from IR mode ",
                 to_string(ir.meta.mode));
  const auto& vmc = ir.meta.vmc;
  const auto sh = detail::shape_of(ir.meta.layer, vmc);
  const bool binary = cfg.mode == Mode::binary;
  if (binary && sh.X % 8 != 0) detail::fail("binary kernels need x to be a multiple of 8");
  if (cfg.flavor == Flavor::neon_c) {
    if (vmc.vec_reg_bits != 128 || vmc.vec_var_bits % 128 != 0)
      detail::fail("neon_c needs 128-bit registers and variables a multiple of 128 bits");
    if (vmc.elem_bits != (binary ? 1 : 8))
      detail::fail("neon_c ", to_string(cfg.mode), " kernels need elem_bits = ", binary ? 1 : 8);
  }

  std::ostringstream os;
  const auto& l = ir.meta.layer;
  const auto& sp = ir.meta.spec;
  detail::open_file(os, cfg,
                    detail::concat(to_string(sp.anchor), " dataflow, aux input/weight/output ",
                                   ir.meta.stash_input, "/", ir.meta.stash_weight, "/",
                                   ir.meta.stash_output, ", ", to_string(cfg.mode), ", ",
                                   to_string(cfg.flavor)));
  os << "/* layer ih=" << l.ih << " iw=" << l.iw << " ic=" << l.ic << " oc=" << l.oc
     << " fh=" << l.fh << " fw=" << l.fw << " s=" << l.s << " pad=" << l.pad << ", x=" << sh.X
     << " */\n";
  os << "#include <stdint.h>\n";
  if (cfg.flavor == Flavor::neon_c) {
    const std::int64_t K = sh.X / (binary ? 128 : 16);
    os << "#include <arm_neon.h>\n\n";
    // int8: b holds loaded lanes, a holds pairwise-widened 32-bit products.
    // binary: b holds packed bits, then per-byte popcounts.
    if (binary)
      os << "typedef struct { uint8x16_t b[" << K << "]; } yf_vec;\n\n";
    else
      os << "typedef struct { int8x16_t b[" << K << "]; int32x4_t a[" << 2 * K
         << "]; } yf_vec;\n\n";
  } else {
    os << '\n';
  }
  os << "static inline " << detail::signature(cfg) << " {\n";
  detail::open_tile_loops(os, sh, binary);
  if (cfg.flavor == Flavor::neon_c)
    detail::emit_neon_body(os, ir, sh);
  else
    detail::emit_scalar_body(os, ir, sh);
  detail::close_tile_loops(os);
  detail::close_file(os, cfg);
  return os.str();
}

/// Plain direct convolution over the same packed arrays as emit()'s kernels.
inline std::string emit_oracle(const LayerConfig& layer, const VectorMachineConfig& vmc,
                               const EmitConfig& cfg) {
  detail::check_ident(cfg.function_name);
  const auto sh = detail::shape_of(layer, vmc);
  const auto od = output_dims(layer);
  const bool binary = cfg.mode == Mode::binary;
  if (binary && sh.X % 8 != 0) detail::fail("binary kernels need x to be a multiple of 8");
  std::ostringstream os;
  detail::open_file(os, cfg, "scalar reference convolution");
  os << "/* layer ih=" << layer.ih << " iw=" << layer.iw << " ic=" << layer.ic
     << " oc=" << layer.oc << " fh=" << layer.fh << " fw=" << layer.fw << " s=" << layer.s
     << " pad=" << layer.pad << ", x=" << sh.X << " */\n";
  os << "#include <stdint.h>\n\n";
  os << "static inline " << detail::signature(cfg) << " {\n";
  os << "  for (int k = 0; k < " << layer.oc << "; ++k)\n";
  os << "    for (int oh = 0; oh < " << od.oh << "; ++oh)\n";
  os << "      for (int ow = 0; ow < " << od.ow << "; ++ow) {\n";
  os << "        int32_t acc = 0;\n";
  os << "        for (int c = 0; c < " << layer.ic << "; ++c)\n";
  os << "          for (int r = 0; r < " << layer.fh << "; ++r)\n";
  os << "            for (int sc = 0; sc < " << layer.fw << "; ++sc) {\n";
  os << "              const int h = oh * " << layer.s << " + r - " << layer.pad
     << ", w = ow * " << layer.s << " + sc - " << layer.pad << ";\n";
  os << "              if (h < 0 || h >= " << layer.ih << " || w < 0 || w >= " << layer.iw
     << ") continue;  /* padding */\n";
  os << "              const long ie = (((long)(c / " << sh.X << ") * " << layer.ih
     << " + h) * " << layer.iw << " + w) * " << sh.X << " + c % " << sh.X << ";\n";
  os << "              const long we = ((((long)(c / " << sh.X << ") * " << layer.oc
     << " + k) * " << layer.fh << " + r) * " << layer.fw << " + sc) * " << sh.X << " + c % "
     << sh.X << ";\n";
  if (binary) {
    os << "              const int a = (input[ie / 8] >> (ie % 8)) & 1;\n";
    os << "              const int b = (weight[we / 8] >> (we % 8)) & 1;\n";
    os << "              acc += a == b ? 1 : -1;\n";
  } else {
    os << "              acc += (int32_t)input[ie] * (int32_t)weight[we];\n";
  }
  os << "            }\n";
  os << "        output[((long)k * " << od.oh << " + oh) * " << od.ow << " + ow] = acc;\n";
  os << "      }\n}\n";
  detail::close_file(os, cfg);
  return os.str();
}

}  // namespace yflow

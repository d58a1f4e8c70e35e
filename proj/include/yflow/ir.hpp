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
#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "yflow/model.hpp"

namespace yflow {

enum class Opcode { vload, vzero, vmul, vadd, vxor, vpopcnt, vredsum, vmov, sacc };

inline constexpr std::array<std::string_view, 9> opcode_names{
    "VLOAD", "VZERO", "VMUL", "VADD", "VXOR", "VPOPCNT", "VREDSUM", "VMOV", "SACC"};

inline std::string_view to_string(Opcode op) { return opcode_names[static_cast<int>(op)]; }

/// One abstract vector-machine instruction.
///
/// Memory operands are tile-relative: a VLOAD of input index i reads vector
/// position i of the current input channel block, a weight index is the filter
/// position r*fw+s of the current (block, kernel) filter, and a SACC offset is
/// h*ow+w within the current kernel's output plane. VREDSUM writes scalar
/// register `dst`; SACC reads scalar register `a`.
struct Instr {
  Opcode op = Opcode::vzero;
  int dst = -1;
  int a = -1;
  int b = -1;
  DataKind tensor = DataKind::input;
  std::int64_t index = 0;
  bool stash = false;  // VLOAD: fills a stash variable; SACC: drains one

  friend bool operator==(const Instr&, const Instr&) = default;
};

struct ScheduleMeta {
  LayerConfig layer;
  VectorMachineConfig vmc;
  DataflowSpec spec;
  Mode mode = Mode::int8;
  int unroll = 1;
  bool rotation = true;
  bool vmov_fallback = false;
  // Stash variables actually used (requests beyond a type's capacity go unused).
  int stash_input = 0;
  int stash_weight = 0;
  int stash_output = 0;
  std::int64_t elided_loads = 0;

  friend bool operator==(const ScheduleMeta&, const ScheduleMeta&) = default;
};

/// Fully materialized instruction list for one (input channel block, kernel) tile.
/// The tile repeats over ceil(ic/x) blocks (outer) and oc kernels (inner).
struct ScheduleIR {
  ScheduleMeta meta;
  std::vector<Instr> instrs;

  std::int64_t block_repeat() const { return channel_blocks(meta.layer, meta.vmc); }
  std::int64_t kernel_repeat() const { return meta.layer.oc; }
  std::int64_t tile_repeat() const { return block_repeat() * kernel_repeat(); }
};

// ---------------------------------------------------------------------------
// Text form
// ---------------------------------------------------------------------------

inline std::string priority_string(const std::vector<DataKind>& p, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += sep;
    out += to_string(p[i]);
  }
  return out;
}

inline std::string format_instr(const Instr& in) {
  std::ostringstream os;
  os << to_string(in.op);
  switch (in.op) {
    case Opcode::vload:
      os << " v" << in.dst << ", " << to_string(in.tensor) << '[' << in.index << ']';
      break;
    case Opcode::vzero: os << " v" << in.dst; break;
    case Opcode::vmul:
    case Opcode::vadd:
    case Opcode::vxor: os << " v" << in.dst << ", v" << in.a << ", v" << in.b; break;
    case Opcode::vpopcnt:
    case Opcode::vmov: os << " v" << in.dst << ", v" << in.a; break;
    case Opcode::vredsum: os << " s" << in.dst << ", v" << in.a; break;
    case Opcode::sacc: os << " output[" << in.index << "], s" << in.a; break;
  }
  if (in.stash) os << (in.op == Opcode::sacc ? " ; #drain" : " ; #fill");
  return os.str();
}

inline std::string dump(const ScheduleIR& ir) {
  const auto& m = ir.meta;
  const auto& l = m.layer;
  std::ostringstream os;
  os << "; yflow schedule ir v1\n";
  os << "; layer ih=" << l.ih << " iw=" << l.iw << " ic=" << l.ic << " oc=" << l.oc
     << " fh=" << l.fh << " fw=" << l.fw << " s=" << l.s << " pad=" << l.pad << '\n';
  os << "; machine vec_reg_bits=" << m.vmc.vec_reg_bits << " vec_var_bits=" << m.vmc.vec_var_bits
     << " num_vec_regs=" << m.vmc.num_vec_regs << " elem_bits=" << m.vmc.elem_bits << '\n';
  os << "; dataflow anchor=" << to_string(m.spec.anchor) << " aux_input=" << m.spec.aux_input_vars
     << " aux_weight=" << m.spec.aux_weight_vars << " aux_output=" << m.spec.aux_output_vars
     << " priority=" << priority_string(m.spec.priority) << '\n';
  os << "; mode " << to_string(m.mode) << '\n';
  os << "; stash input=" << m.stash_input << " weight=" << m.stash_weight
     << " output=" << m.stash_output << '\n';
  os << "; unroll " << m.unroll << " rotation=" << (m.rotation ? "on" : "off")
     << " fallback=" << (m.vmov_fallback ? "yes" : "no") << '\n';
  os << "; repeat cb=" << ir.block_repeat() << " k=" << ir.kernel_repeat() << '\n';
  os << "; elided_loads " << m.elided_loads << '\n';
  for (const Instr& in : ir.instrs) os << format_instr(in) << '\n';
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::int64_t to_int(std::string_view s, int line) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    fail("ir line ", line, ": expected integer, got '", s, "'");
  return v;
}

inline std::map<std::string, std::string> key_values(const std::vector<std::string>& toks,
                                                     std::size_t from) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = from; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq != std::string::npos) kv[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
  }
  return kv;
}

inline int reg_operand(std::string_view tok, char prefix, int line) {
  if (!tok.empty() && tok.back() == ',') tok.remove_suffix(1);
  if (tok.size() < 2 || tok[0] != prefix)
    fail("ir line ", line, ": expected ", prefix, "<n>, got '", tok, "'");
  return static_cast<int>(to_int(tok.substr(1), line));
}

inline std::pair<DataKind, std::int64_t> mem_operand(std::string_view tok, int line) {
  if (!tok.empty() && tok.back() == ',') tok.remove_suffix(1);
  auto lb = tok.find('[');
  if (lb == std::string_view::npos || tok.back() != ']')
    fail("ir line ", line, ": expected tensor[index], got '", tok, "'");
  return {parse_kind(tok.substr(0, lb)), to_int(tok.substr(lb + 1, tok.size() - lb - 2), line)};
}

}  // namespace detail

/// Parses the text produced by dump(). Malformed input raises config_error.
inline ScheduleIR parse_ir(std::string_view text) {
  ScheduleIR ir;
  std::istringstream is{std::string(text)};
  std::string raw;
  int line = 0;
  bool saw_layer = false, saw_machine = false;
  while (std::getline(is, raw)) {
    ++line;
    std::string_view sv = raw;
    if (sv.empty()) continue;
    if (sv[0] == ';') {
      auto toks = detail::split_ws(sv.substr(1));
      if (toks.empty()) continue;
      auto kv = detail::key_values(toks, 1);
      auto num = [&](const char* key) -> int {
        auto it = kv.find(key);
        if (it == kv.end()) detail::fail("ir line ", line, ": missing '", key, "'");
        return static_cast<int>(detail::to_int(it->second, line));
      };
      const std::string& head = toks[0];
      if (head == "layer") {
        auto& l = ir.meta.layer;
        l = {num("ih"), num("iw"), num("ic"), num("oc"), num("fh"), num("fw"), num("s"), num("pad")};
        saw_layer = true;
      } else if (head == "machine") {
        ir.meta.vmc = {num("vec_reg_bits"), num("vec_var_bits"), num("num_vec_regs"),
                       num("elem_bits")};
        saw_machine = true;
      } else if (head == "dataflow") {
        auto& sp = ir.meta.spec;
        sp.anchor = parse_anchor(kv["anchor"]);
        sp.aux_input_vars = num("aux_input");
        sp.aux_weight_vars = num("aux_weight");
        sp.aux_output_vars = num("aux_output");
        sp.priority.clear();
        std::string_view pr = kv["priority"];
        while (!pr.empty()) {
          auto comma = pr.find(',');
          sp.priority.push_back(parse_kind(pr.substr(0, comma)));
          if (comma == std::string_view::npos) break;
          pr.remove_prefix(comma + 1);
        }
      } else if (head == "mode" && toks.size() > 1) {
        ir.meta.mode = parse_mode(toks[1]);
      } else if (head == "stash") {
        ir.meta.stash_input = num("input");
        ir.meta.stash_weight = num("weight");
        ir.meta.stash_output = num("output");
      } else if (head == "unroll" && toks.size() > 1) {
        ir.meta.unroll = static_cast<int>(detail::to_int(toks[1], line));
        ir.meta.rotation = kv["rotation"] != "off";
        ir.meta.vmov_fallback = kv["fallback"] == "yes";
      } else if (head == "elided_loads" && toks.size() > 1) {
        ir.meta.elided_loads = detail::to_int(toks[1], line);
      }
      continue;
    }

    Instr in;
    auto semi = sv.find(';');
    if (semi != std::string_view::npos) {
      in.stash = sv.substr(semi).find('#') != std::string_view::npos &&
                 (sv.find("#fill") != std::string_view::npos ||
                  sv.find("#drain") != std::string_view::npos);
      sv = sv.substr(0, semi);
    }
    auto toks = detail::split_ws(sv);
    if (toks.empty()) continue;
    const std::string& op = toks[0];
    auto need = [&](std::size_t n) {
      if (toks.size() != n + 1)
        detail::fail("ir line ", line, ": ", op, " takes ", n, " operands");
    };
    if (op == "VLOAD") {
      need(2);
      in.op = Opcode::vload;
      in.dst = detail::reg_operand(toks[1], 'v', line);
      std::tie(in.tensor, in.index) = detail::mem_operand(toks[2], line);
    } else if (op == "VZERO") {
      need(1);
      in.op = Opcode::vzero;
      in.dst = detail::reg_operand(toks[1], 'v', line);
    } else if (op == "VMUL" || op == "VADD" || op == "VXOR") {
      need(3);
      in.op = op == "VMUL" ? Opcode::vmul : op == "VADD" ? Opcode::vadd : Opcode::vxor;
      in.dst = detail::reg_operand(toks[1], 'v', line);
      in.a = detail::reg_operand(toks[2], 'v', line);
      in.b = detail::reg_operand(toks[3], 'v', line);
    } else if (op == "VPOPCNT" || op == "VMOV") {
      need(2);
      in.op = op == "VPOPCNT" ? Opcode::vpopcnt : Opcode::vmov;
      in.dst = detail::reg_operand(toks[1], 'v', line);
      in.a = detail::reg_operand(toks[2], 'v', line);
    } else if (op == "VREDSUM") {
      need(2);
      in.op = Opcode::vredsum;
      in.dst = detail::reg_operand(toks[1], 's', line);
      in.a = detail::reg_operand(toks[2], 'v', line);
    } else if (op == "SACC") {
      need(2);
      in.op = Opcode::sacc;
      auto [kind, idx] = detail::mem_operand(toks[1], line);
      if (kind != DataKind::output) detail::fail("ir line ", line, ": SACC targets output[]");
      in.tensor = DataKind::output;
      in.index = idx;
      in.a = detail::reg_operand(toks[2], 's', line);
    } else {
      detail::fail("ir line ", line, ": unknown opcode '", op, "'");
    }
    ir.instrs.push_back(in);
  }
  if (!saw_layer || !saw_machine) detail::fail("ir text lacks layer/machine header");
  ir.meta.layer.validate();
  ir.meta.vmc.validate();
  return ir;
}

}  // namespace yflow

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

// Builds an emitted kernel next to the emitted reference convolution with the
// system C compiler and compares their outputs on random packed operands.

#ifndef YFLOW_TESTS_COMPILE_HARNESS_HPP_
#define YFLOW_TESTS_COMPILE_HARNESS_HPP_

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "yflow/emit.hpp"

namespace yflow::harness {

inline bool compile_tests_enabled() {
  const char* v = std::getenv("YFLOW_COMPILE_TEST");
  return v != nullptr && std::string(v) == "1";
}

struct CompileOutcome {
  bool ok = false;
  std::string log;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string driver_source(const ScheduleIR& ir, unsigned seed) {
  const auto& l = ir.meta.layer;
  const auto& vmc = ir.meta.vmc;
  const bool binary = ir.meta.mode == Mode::binary;
  const long X = vmc.lanes();
  const long CB = channel_blocks(l, vmc);
  const long HW = static_cast<long>(l.ih) * l.iw;
  const long F = static_cast<long>(l.fh) * l.fw;
  const long E = output_elements(l);
  const long in_elems = CB * HW * X, wt_elems = CB * l.oc * F * X;
  const char* T = binary ? "uint8_t" : "int8_t";
  std::ostringstream os;
  os << "#include <stdint.h>\n#include <stdio.h>\n#include <stdlib.h>\n";
  os << "#include \"kernel.h\"\n#include \"oracle.h\"\n\n";
  os << "static uint32_t st = " << seed * 2654435761u + 1 << "u;\n";
  os << "static uint32_t next(void) { st = st * 1664525u + 1013904223u; return st >> 8; }\n\n";
  os << "int main(void) {\n";
  if (binary) {
    os << "  static " << T << " in[" << (in_elems + 7) / 8 << "], wt[" << (wt_elems + 7) / 8
       << "];\n";
    os << "  for (long i = 0; i < " << (in_elems + 7) / 8 << "; ++i) in[i] = (uint8_t)next();\n";
    os << "  for (long i = 0; i < " << (wt_elems + 7) / 8 << "; ++i) wt[i] = (uint8_t)next();\n";
  } else {
    // Lanes past ic stay zero, as packing would leave them.
    os << "  static " << T << " in[" << in_elems << "], wt[" << wt_elems << "];\n";
    os << "  for (long e = 0; e < " << in_elems << "; ++e)\n";
    os << "    in[e] = (e / " << HW * X << ") * " << X << " + e % " << X << " < " << l.ic
       << " ? (int8_t)(next() & 0xff) : 0;\n";
    os << "  for (long e = 0; e < " << wt_elems << "; ++e)\n";
    os << "    wt[e] = (e / " << static_cast<long>(l.oc) * F * X << ") * " << X << " + e % " << X
       << " < " << l.ic << " ? (int8_t)(next() & 0xff) : 0;\n";
  }
  os << "  static int32_t got[" << l.oc * E << "], want[" << l.oc * E << "];\n";
  os << "  for (long i = 0; i < " << l.oc * E << "; ++i) { got[i] = 12345; want[i] = -1; }\n";
  os << "  yf_kernel(in, wt, got);\n  yf_oracle(in, wt, want);\n";
  os << "  for (long i = 0; i < " << l.oc * E << "; ++i)\n";
  os << "    if (got[i] != want[i]) {\n";
  os << "      printf(\"MISMATCH %ld got %d want %d\\n\", i, (int)got[i], (int)want[i]);\n";
  os << "      return 1;\n    }\n";
  os << "  printf(\"OK\\n\");\n  return 0;\n}\n";
  return os.str();
}

/// Emits `ir` with `flavor`, compiles it with `cc` and runs it against the
/// emitted reference. `shim_dir` supplies arm_neon.h on hosts without NEON.
inline CompileOutcome compile_and_compare(const ScheduleIR& ir, Flavor flavor,
                                          const std::string& shim_dir, unsigned seed) {
  namespace fs = std::filesystem;
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("yflow_cc_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::create_directories(dir);
  EmitConfig kc{flavor, "yf_kernel", "", ir.meta.mode};
  EmitConfig oc{Flavor::scalar_c, "yf_oracle", "", ir.meta.mode};
  CompileOutcome out;
  try {
    std::ofstream(dir / "kernel.h") << emit(ir, kc);
    std::ofstream(dir / "oracle.h") << emit_oracle(ir.meta.layer, ir.meta.vmc, oc);
  } catch (const std::exception& e) {
    out.log = std::string("emit failed: ") + e.what();
    return out;
  }
  std::ofstream(dir / "main.c") << driver_source(ir, seed);
  const std::string log = (dir / "log.txt").string();
  std::string cmd = "cc -std=c99 -O1 -I'" + dir.string() + "'";
  if (flavor == Flavor::neon_c) cmd += " -I'" + shim_dir + "'";
  cmd += " -o '" + (dir / "run").string() + "' '" + (dir / "main.c").string() + "' > '" + log +
         "' 2>&1";
  if (std::system(cmd.c_str()) != 0) {
    out.log = "compile failed: " + read_file(log);
    fs::remove_all(dir);
    return out;
  }
  const int rc = std::system(("'" + (dir / "run").string() + "' > '" + log + "' 2>&1").c_str());
  out.log = read_file(log);
  out.ok = rc == 0 && out.log.rfind("OK", 0) == 0;
  fs::remove_all(dir);
  return out;
}

}  // namespace yflow::harness

#endif  // YFLOW_TESTS_COMPILE_HARNESS_HPP_

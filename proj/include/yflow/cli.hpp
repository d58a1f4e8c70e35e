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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "yflow/emit.hpp"
#include "yflow/ir.hpp"
#include "yflow/model.hpp"
#include "yflow/pipeline.hpp"
#include "yflow/reuse.hpp"
#include "yflow/schedule.hpp"
#include "yflow/simvm.hpp"

namespace yflow::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kVerifyFailed = 1;
inline constexpr int kConfigError = 2;

/// Parsed network/machine description.
///
/// {
///   "machine": {"vec_reg_bits": 128, "vec_var_bits": 128, "num_vec_regs": 32, "elem_bits": 8},
///   "mode": "int8",
///   "layers": [{"ih": 16, "iw": 16, "ic": 16, "oc": 16, "fh": 3, "fw": 3, "s": 1, "pad": 1}],
///   "candidates": {"x": [16, 32]},          (optional)
///   "weights": {"loads": 1, "vmov": 1},     (optional)
///   "seed": 1                               (optional)
/// }
struct RunConfig {
  VectorMachineConfig vmc;
  Mode mode = Mode::int8;
  std::vector<LayerConfig> layers;
  std::vector<int> x_candidates;  // empty: defaults per layer
  CostWeights weights;
  std::uint64_t seed = 1;
};

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail("cannot open config '", path, "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    detail::fail("config '", path, "': ", e.what());
  }
  RunConfig cfg;
  try {
    if (j.contains("machine")) {
      const auto& m = j.at("machine");
      cfg.vmc.vec_reg_bits = m.value("vec_reg_bits", cfg.vmc.vec_reg_bits);
      cfg.vmc.vec_var_bits = m.value("vec_var_bits", cfg.vmc.vec_var_bits);
      cfg.vmc.num_vec_regs = m.value("num_vec_regs", cfg.vmc.num_vec_regs);
      cfg.vmc.elem_bits = m.value("elem_bits", cfg.vmc.elem_bits);
    }
    if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
    for (const auto& l : j.at("layers")) {
      LayerConfig lc;
      lc.ih = l.at("ih").get<int>();
      lc.iw = l.at("iw").get<int>();
      lc.ic = l.at("ic").get<int>();
      lc.oc = l.at("oc").get<int>();
      lc.fh = l.at("fh").get<int>();
      lc.fw = l.at("fw").get<int>();
      lc.s = l.value("s", 1);
      lc.pad = l.value("pad", 0);
      lc.validate();
      cfg.layers.push_back(lc);
    }
    if (j.contains("candidates") && j.at("candidates").contains("x"))
      cfg.x_candidates = j.at("candidates").at("x").get<std::vector<int>>();
    if (j.contains("weights"))
      for (const auto& [k, v] : j.at("weights").items()) cfg.weights.set(k, v.get<double>());
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    detail::fail("config '", path, "': ", e.what());
  }
  if (cfg.layers.empty()) detail::fail("config '", path, "' lists no layers");
  cfg.vmc.validate();
  return cfg;
}

/// Options shared by the subcommands.
struct Options {
  std::string config;
  int layer = 0;
  std::string anchor = "os";
  int aux_input = 0, aux_weight = 0, aux_output = 0;
  bool recommend = false;
  std::string mode;  // empty: from config
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string weights;
  std::string ir;
  std::string flavor;  // empty: neon_c when the machine allows it
};

namespace detail {

using yflow::detail::concat;
using yflow::detail::fail;

class Outputs {
public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {}
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  // Called once everything has been computed.
  void flush() const {
    if (files_.empty()) return;
    std::filesystem::create_directories(dir_);
    for (const auto& [name, content] : files_) {
      std::ofstream f(std::filesystem::path(dir_) / name, std::ios::binary);
      if (!f) fail("cannot write '", name, "' under '", dir_, "'");
      f << content;
    }
  }

private:
  std::string dir_;
  std::map<std::string, std::string> files_;
};

struct Context {
  RunConfig cfg;
  LayerConfig layer;
  Mode mode = Mode::int8;
  std::uint64_t seed = 1;
};

inline Context context(const Options& o, bool need_layer) {
  Context c;
  c.cfg = load_config(o.config);
  c.mode = o.mode.empty() ? c.cfg.mode : parse_mode(o.mode);
  c.seed = o.seed.value_or(c.cfg.seed);
  if (!o.weights.empty()) c.cfg.weights = CostWeights::parse(o.weights);
  if (need_layer) {
    if (o.layer < 0 || o.layer >= static_cast<int>(c.cfg.layers.size()))
      fail("layer ", o.layer, " not in config (", c.cfg.layers.size(), " layers)");
    c.layer = c.cfg.layers[o.layer];
  }
  return c;
}

inline DataflowSpec spec_from(const Options& o, const Context& c) {
  if (o.recommend) return recommend(c.layer, c.cfg.vmc);
  DataflowSpec sp;
  sp.anchor = parse_anchor(o.anchor);
  sp.aux_input_vars = o.aux_input;
  sp.aux_weight_vars = o.aux_weight;
  sp.aux_output_vars = o.aux_output;
  return sp;
}

inline Flavor flavor_for(const Options& o, const VectorMachineConfig& vmc, Mode mode) {
  if (o.flavor == "neon_c") return Flavor::neon_c;
  if (o.flavor == "scalar_c") return Flavor::scalar_c;
  if (!o.flavor.empty()) fail("unknown flavor '", o.flavor, "'");
  const bool neon_ok = vmc.vec_reg_bits == 128 && vmc.vec_var_bits % 128 == 0 &&
                       vmc.elem_bits == (mode == Mode::binary ? 1 : 8);
  return neon_ok ? Flavor::neon_c : Flavor::scalar_c;
}

inline std::vector<Candidate> candidate_pool(const RunConfig& cfg, const LayerConfig& layer,
                                             Mode mode) {
  if (cfg.x_candidates.empty()) return default_candidates(layer, cfg.vmc, mode);
  std::vector<int> xs;
  for (int x : cfg.x_candidates) {
    if (x < 1) fail("candidate x must be >= 1");
    if (mode == Mode::binary && layer.ic % x != 0) continue;
    try {
      machine_for(cfg.vmc, x);
    } catch (const config_error&) {
      continue;  // not a whole number of registers, or too few variables
    }
    xs.push_back(x);
  }
  if (xs.empty()) fail("no candidate block width is usable for this layer");
  return candidates_for(layer, cfg.vmc, xs);
}

// ---- subcommands ----------------------------------------------------------

inline int cmd_gen(const Options& o, std::ostream& out) {
  const auto c = context(o, true);
  const auto spec = spec_from(o, c);
  const auto ir = generate(c.layer, c.cfg.vmc, spec, c.mode);
  EmitConfig ec;
  ec.flavor = flavor_for(o, c.cfg.vmc, c.mode);
  ec.mode = c.mode;
  ec.function_name = concat("yflow_layer", o.layer, "_", to_string(spec.anchor));
  const std::string stem = concat("layer", o.layer, "_", to_string(spec.anchor));
  Outputs files(o.out);
  files.add(stem + ".ir", dump(ir));
  files.add(stem + ".c", emit(ir, ec));
  files.flush();
  out << "wrote " << stem << ".ir and " << stem << ".c (" << label(spec) << ", "
      << to_string(ec.flavor) << ")\n";
  return kOk;
}

inline int cmd_sim(const Options& o, std::ostream& out) {
  ScheduleIR ir;
  std::uint64_t seed = o.seed.value_or(1);
  std::string stem;
  if (!o.ir.empty()) {
    std::ifstream f(o.ir);
    if (!f) fail("cannot open IR file '", o.ir, "'");
    std::stringstream ss;
    ss << f.rdbuf();
    ir = parse_ir(ss.str());
    if (!o.config.empty()) seed = context(o, false).seed;
    if (o.seed) seed = *o.seed;
    stem = std::filesystem::path(o.ir).stem().string();
  } else {
    const auto c = context(o, true);
    const auto spec = spec_from(o, c);
    ir = generate(c.layer, c.cfg.vmc, spec, c.mode);
    seed = c.seed;
    stem = concat("layer", o.layer, "_", to_string(spec.anchor));
  }
  Verdict v;
  try {
    v = verify(ir, seed);
  } catch (const execution_error& e) {
    out << "FAIL " << e.what() << '\n';
    return kVerifyFailed;
  }
  Outputs files(o.out);
  files.add(stem + "_counts.csv", to_csv(v.report));
  files.flush();
  if (!v.pass) {
    out << "FAIL " << v.detail << '\n';
    return kVerifyFailed;
  }
  out << "PASS " << to_string(ir.meta.mode) << ' ' << label(ir.meta.spec) << " seed=" << seed
      << " vector_loads=" << v.report.layer.vector_loads << '\n';
  return kOk;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
  const auto c = context(o, true);
  const auto pool = candidate_pool(c.cfg, c.layer, c.mode);
  SweepResult sw;
  try {
    sw = blocking_sweep(c.layer, c.cfg.vmc, pool, c.mode, c.cfg.weights);
  } catch (const std::exception& e) {
    fail("layer ", o.layer, ": ", e.what());
  }
  Outputs files(o.out);
  files.add(concat("layer", o.layer, "_sweep.csv"), sweep_csv(sw));
  files.flush();
  out << "best " << label(sw.best()) << " cost=" << sw.rows.front().cost << '\n';
  return kOk;
}

inline int cmd_layout(const Options& o, std::ostream& out) {
  const auto c = context(o, false);
  std::vector<std::vector<Candidate>> pools;
  for (const auto& l : c.cfg.layers) pools.push_back(candidate_pool(c.cfg, l, c.mode));
  const auto net = plan_network(c.cfg.layers, c.cfg.vmc, c.mode, pools, c.cfg.weights);
  const auto table = collect_costs(net, c.cfg.weights);
  const auto best = layout_dp(table);
  const auto greedy = greedy_assignment(table);
  Outputs files(o.out);
  files.add("cost_table.csv", cost_table_csv(table));
  files.add("layout.txt", assignment_report(table, best) +
                              concat("greedy_total ", greedy.total, '\n'));
  files.flush();
  out << "total " << best.total << " (greedy " << greedy.total << ")\n";
  return kOk;
}

inline int cmd_recommend(const Options& o, std::ostream& out) {
  const auto c = context(o, true);
  const auto spec = recommend(c.layer, c.cfg.vmc);
  out << label(spec) << " budget=" << c.cfg.vmc.num_var_available() - 3 << '\n';
  return kOk;
}

}  // namespace detail

/// Entry point for the `yflow` tool. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"yflow: SIMD convolution dataflow explorer"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool layer, bool spec) {
    sub->add_option("--config", o.config, "network/machine JSON file")->required();
    sub->add_option("--mode", o.mode, "int8 or binary (default: from config)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--weights", o.weights, "cost weights, k=v,...");
    if (layer) sub->add_option("--layer", o.layer, "layer index");
    if (spec) {
      sub->add_option("--anchor", o.anchor, "is, ws or os");
      sub->add_option("--aux-input", o.aux_input, "stashed input variables");
      sub->add_option("--aux-weight", o.aux_weight, "stashed weight variables");
      sub->add_option("--aux-output", o.aux_output, "stashed output variables");
      sub->add_flag("--recommend", o.recommend, "use the recommended dataflow");
    }
  };
  auto* gen = app.add_subcommand("gen", "write IR dump and C kernel");
  common(gen, true, true);
  gen->add_option("--flavor", o.flavor, "neon_c or scalar_c");
  auto* sim = app.add_subcommand("sim", "verify against the oracle and count instructions");
  common(sim, true, true);
  sim->get_option("--config")->required(false);
  sim->add_option("--ir", o.ir, "simulate an IR text file instead of generating one");
  auto* sweep = app.add_subcommand("sweep", "rank blocking/dataflow candidates for one layer");
  common(sweep, true, false);
  auto* layout = app.add_subcommand("layout", "choose per-layer layouts for the network");
  common(layout, false, false);
  auto* rec = app.add_subcommand("recommend", "print the recommended dataflow");
  common(rec, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  try {
    if (*gen) return detail::cmd_gen(o, out);
    if (*sim) {
      if (o.ir.empty() && o.config.empty()) detail::fail("sim needs --config or --ir");
      return detail::cmd_sim(o, out);
    }
    if (*sweep) return detail::cmd_sweep(o, out);
    if (*layout) return detail::cmd_layout(o, out);
    if (*rec) return detail::cmd_recommend(o, out);
  } catch (const config_error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const execution_error& e) {
    err << "error: " << e.what() << '\n';
    return kVerifyFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace yflow::cli

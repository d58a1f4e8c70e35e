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
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "yflow/model.hpp"
#include "yflow/reuse.hpp"
#include "yflow/schedule.hpp"
#include "yflow/simvm.hpp"

namespace yflow {

/// Weights applied to whole-layer instruction counts. Arithmetic covers VZERO,
/// VMUL, VADD, VXOR and VPOPCNT.
struct CostWeights {
  double loads = 1;
  double scalar_reads = 1;
  double scalar_writes = 1;
  double vmov = 1;
  double vredsum = 1;
  double arith = 0;

  double apply(const Counts& c) const {
    return loads * c.vector_loads + scalar_reads * c.scalar_reads +
           scalar_writes * c.scalar_writes + vmov * c.vmov + vredsum * c.vredsum +
           arith * (c.vzero + c.vmul + c.vadd + c.vxor + c.vpopcnt);
  }

  void set(std::string_view key, double v) {
    if (v < 0) detail::fail("cost weight '", key, "' must be >= 0");
    if (key == "loads") loads = v;
    else if (key == "scalar_reads") scalar_reads = v;
    else if (key == "scalar_writes") scalar_writes = v;
    else if (key == "vmov") vmov = v;
    else if (key == "vredsum") vredsum = v;
    else if (key == "arith") arith = v;
    else detail::fail("unknown cost weight '", key, "'");
  }

  /// Parses "loads=1,vmov=2,...". Unnamed weights keep their defaults.
  static CostWeights parse(std::string_view text) {
    CostWeights w;
    while (!text.empty()) {
      const auto comma = text.find(',');
      const auto item = text.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) detail::fail("cost weight '", item, "' lacks '='");
      std::istringstream is{std::string(item.substr(eq + 1))};
      double v = 0;
      if (!(is >> v) || !is.eof()) detail::fail("cost weight '", item, "' is not a number");
      w.set(item.substr(0, eq), v);
      if (comma == std::string_view::npos) break;
      text.remove_prefix(comma + 1);
    }
    return w;
  }
};

/// One schedulable configuration: channel-block width plus dataflow.
struct Candidate {
  int x = 1;
  DataflowSpec spec;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

inline std::string label(const DataflowSpec& sp) {
  return detail::concat(to_string(sp.anchor), "(i=", sp.aux_input_vars, " w=", sp.aux_weight_vars,
                        " o=", sp.aux_output_vars, " p=", priority_string(sp.priority, '>'), ")");
}

inline std::string label(const Candidate& c) { return detail::concat("x", c.x, ":", label(c.spec)); }

/// NCHW[xc] name of a block width; x = 1 is plain NCHW.
inline std::string layout_name(int x) { return x == 1 ? "nchw" : detail::concat("nchw", x, "c"); }

struct NetworkSpec {
  std::vector<LayerConfig> layers;
  std::vector<std::vector<Candidate>> candidates;  // per layer
  VectorMachineConfig vmc;
  Mode mode = Mode::int8;

  void validate() const {
    if (layers.empty()) detail::fail("network has no layers");
    if (candidates.size() != layers.size()) detail::fail("need one candidate set per layer");
    vmc.validate();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].validate();
      if (candidates[i].empty()) detail::fail("layer ", i, ": empty candidate set");
      if (i > 0 && layers[i - 1].oc != layers[i].ic)
        detail::fail("layer ", i, ": ic=", layers[i].ic, " does not match previous oc=",
                     layers[i - 1].oc);
    }
  }
};

struct CostTable {
  std::vector<std::vector<Candidate>> configs;
  std::vector<std::vector<double>> layer_cost;                // [layer][config]
  std::vector<double> input_cost;                             // NCHW network input -> layer 0
  std::vector<std::vector<std::vector<double>>> transform;    // [boundary b][a of b-1][c of b]
};

/// Element moves to turn an NCHW[xa] tensor into NCHW[xb].
inline double transform_cost(int channels, int h, int w, int xa, int xb) {
  if (xa == xb) return 0;
  const auto plain = make_nchw(DataKind::input, channels, h, w);
  std::size_t moved = 0;
  if (xa > 1) unpack(pack(plain, xa), channels, &moved);
  if (xb > 1) pack(plain, xb, &moved);
  return static_cast<double>(moved);
}

inline VectorMachineConfig machine_for(const VectorMachineConfig& vmc, int x) {
  return with_lanes(vmc, x);
}

/// Weighted whole-layer cost of one candidate.
inline double candidate_cost(const LayerConfig& layer, const VectorMachineConfig& vmc, Mode mode,
                             const Candidate& c, const CostWeights& weights) {
  const auto ir = generate(layer, machine_for(vmc, c.x), c.spec, mode);
  return weights.apply(measure(ir).layer);
}

inline CostTable collect_costs(const NetworkSpec& net, const CostWeights& weights = {}) {
  net.validate();
  CostTable t;
  t.configs = net.candidates;
  const std::size_t L = net.layers.size();
  t.layer_cost.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    try {
      for (const Candidate& c : net.candidates[i])
        t.layer_cost[i].push_back(candidate_cost(net.layers[i], net.vmc, net.mode, c, weights));
    } catch (const std::exception& e) {
      detail::fail("layer ", i, ": ", e.what());
    }
  }
  const auto& first = net.layers[0];
  for (const Candidate& c : net.candidates[0])
    t.input_cost.push_back(transform_cost(first.ic, first.ih, first.iw, 1, c.x));
  t.transform.resize(L);
  for (std::size_t b = 1; b < L; ++b) {
    const auto& l = net.layers[b];
    for (const Candidate& a : net.candidates[b - 1]) {
      t.transform[b].emplace_back();
      for (const Candidate& c : net.candidates[b])
        t.transform[b].back().push_back(transform_cost(l.ic, l.ih, l.iw, a.x, c.x));
    }
  }
  return t;
}

struct Assignment {
  std::vector<int> choice;  // candidate index per layer
  double total = 0;
};

inline double assignment_cost(const CostTable& t, const std::vector<int>& choice) {
  double total = t.input_cost.empty() ? 0 : t.input_cost[choice[0]];
  for (std::size_t i = 0; i < choice.size(); ++i) {
    total += t.layer_cost[i][choice[i]];
    if (i > 0) total += t.transform[i][choice[i - 1]][choice[i]];
  }
  return total;
}

/// Minimizes summed layer and boundary costs; ties go to the lower index.
inline Assignment layout_dp(const CostTable& t) {
  const std::size_t L = t.layer_cost.size();
  if (L == 0) detail::fail("layout_dp: empty table");
  for (std::size_t i = 0; i < L; ++i)
    if (t.layer_cost[i].empty()) detail::fail("layout_dp: layer ", i, " has no candidates");

  std::vector<std::vector<double>> best(L);
  std::vector<std::vector<int>> from(L);
  best[0] = t.layer_cost[0];
  if (!t.input_cost.empty())
    for (std::size_t c = 0; c < best[0].size(); ++c) best[0][c] += t.input_cost[c];
  for (std::size_t i = 1; i < L; ++i) {
    const std::size_t n = t.layer_cost[i].size();
    best[i].assign(n, std::numeric_limits<double>::infinity());
    from[i].assign(n, -1);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t a = 0; a < best[i - 1].size(); ++a) {
        const double v = best[i - 1][a] + t.transform[i][a][c] + t.layer_cost[i][c];
        if (v < best[i][c]) {
          best[i][c] = v;
          from[i][c] = static_cast<int>(a);
        }
      }
  }
  Assignment out;
  out.choice.assign(L, 0);
  const auto& last = best[L - 1];
  out.choice[L - 1] = static_cast<int>(std::min_element(last.begin(), last.end()) - last.begin());
  out.total = last[out.choice[L - 1]];
  for (std::size_t i = L - 1; i > 0; --i) out.choice[i - 1] = from[i][out.choice[i]];
  return out;
}

/// Each layer's cheapest candidate on its own, ignoring boundaries.
inline Assignment greedy_assignment(const CostTable& t) {
  Assignment out;
  for (const auto& col : t.layer_cost)
    out.choice.push_back(static_cast<int>(std::min_element(col.begin(), col.end()) - col.begin()));
  out.total = assignment_cost(t, out.choice);
  return out;
}

// ---------------------------------------------------------------------------
// Blocking sweep
// ---------------------------------------------------------------------------

/// Block widths of one, two and four registers that divide ic; falls back to a
/// single register when none does (int8 tail blocks are zero-filled).
inline std::vector<int> default_block_widths(const LayerConfig& layer,
                                             const VectorMachineConfig& vmc, Mode mode) {
  const int base = vmc.vec_reg_bits / vmc.elem_bits;
  std::vector<int> xs;
  for (int mult : {1, 2, 4}) {
    const int x = base * mult;
    if (layer.ic % x != 0) continue;
    if (vmc.num_vec_regs / mult < 3) continue;
    xs.push_back(x);
  }
  if (xs.empty()) {
    if (mode == Mode::binary)
      detail::fail("binary mode: no block width divides ic=", layer.ic);
    xs.push_back(base);
  }
  return xs;
}

/// Basic dataflows, both priority orders of each anchor's full budget, and the
/// recommended spec, for every block width in `xs`.
inline std::vector<Candidate> candidates_for(const LayerConfig& layer,
                                             const VectorMachineConfig& vmc,
                                             const std::vector<int>& xs) {
  std::vector<Candidate> out;
  auto add = [&](int x, const DataflowSpec& sp) {
    if (std::find(out.begin(), out.end(), Candidate{x, sp}) == out.end()) out.push_back({x, sp});
  };
  for (int x : xs) {
    const auto m = machine_for(vmc, x);
    const int budget = m.num_var_available() - 3;
    add(x, recommend(layer, m));
    for (Anchor a : {Anchor::os, Anchor::is, Anchor::ws}) {
      DataflowSpec basic;
      basic.anchor = a;
      add(x, basic);
      std::vector<DataKind> aux;
      for (DataKind k : {DataKind::weight, DataKind::input, DataKind::output})
        if (aux_allowed(a, k)) aux.push_back(k);
      add(x, split_budget(a, budget, aux, layer));
      add(x, split_budget(a, budget, {aux[1], aux[0]}, layer));
    }
  }
  return out;
}

inline std::vector<Candidate> default_candidates(const LayerConfig& layer,
                                                 const VectorMachineConfig& vmc, Mode mode) {
  return candidates_for(layer, vmc, default_block_widths(layer, vmc, mode));
}

struct SweepRow {
  Candidate candidate;
  double cost = 0;
  int index = 0;  // position in the candidate list
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending cost, ties broken deterministically
  Candidate best() const { return rows.front().candidate; }
};

/// Simulates every candidate that fits the register budget. Ties prefer the
/// smaller x, then a weight-first priority, then the earlier candidate.
inline SweepResult blocking_sweep(const LayerConfig& layer, const VectorMachineConfig& vmc,
                                  const std::vector<Candidate>& candidates, Mode mode = Mode::int8,
                                  const CostWeights& weights = {}) {
  if (candidates.empty()) detail::fail("blocking_sweep: no candidates");
  SweepResult res;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    VectorMachineConfig m;
    try {
      m = machine_for(vmc, c.x);
      c.spec.validate(m);
    } catch (const config_error&) {
      continue;  // over budget at this width
    }
    res.rows.push_back({c, candidate_cost(layer, vmc, mode, c, weights), static_cast<int>(i)});
  }
  if (res.rows.empty()) detail::fail("blocking_sweep: no candidate fits the register budget");
  auto weight_first = [](const Candidate& c) {
    return !c.spec.priority.empty() && c.spec.priority.front() == DataKind::weight ? 0 : 1;
  };
  std::sort(res.rows.begin(), res.rows.end(), [&](const SweepRow& a, const SweepRow& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.candidate.x != b.candidate.x) return a.candidate.x < b.candidate.x;
    if (weight_first(a.candidate) != weight_first(b.candidate))
      return weight_first(a.candidate) < weight_first(b.candidate);
    return a.index < b.index;
  });
  return res;
}

/// Per layer, the cheapest spec at each block width; these become the layout
/// candidates.
inline NetworkSpec plan_network(const std::vector<LayerConfig>& layers,
                                const VectorMachineConfig& vmc, Mode mode,
                                const std::vector<std::vector<Candidate>>& pools,
                                const CostWeights& weights = {}) {
  NetworkSpec net;
  net.layers = layers;
  net.vmc = vmc;
  net.mode = mode;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    SweepResult sw;
    try {
      sw = blocking_sweep(layers[i], vmc, pools.at(i), mode, weights);
    } catch (const std::exception& e) {
      detail::fail("layer ", i, ": ", e.what());
    }
    std::map<int, Candidate> per_x;
    for (const SweepRow& r : sw.rows) per_x.emplace(r.candidate.x, r.candidate);
    net.candidates.emplace_back();
    for (const auto& [x, c] : per_x) net.candidates.back().push_back(c);
  }
  return net;
}

inline std::string cost_table_csv(const CostTable& t) {
  std::ostringstream os;
  os << "layer,config,cost\n";
  for (std::size_t i = 0; i < t.layer_cost.size(); ++i)
    for (std::size_t c = 0; c < t.layer_cost[i].size(); ++c)
      os << i << ',' << label(t.configs[i][c]) << ',' << t.layer_cost[i][c] << '\n';
  os << "boundary,layout_a,layout_b,cost\n";
  for (std::size_t c = 0; c < t.input_cost.size(); ++c)
    os << 0 << ',' << layout_name(1) << ',' << layout_name(t.configs[0][c].x) << ','
       << t.input_cost[c] << '\n';
  for (std::size_t b = 1; b < t.transform.size(); ++b)
    for (std::size_t a = 0; a < t.transform[b].size(); ++a)
      for (std::size_t c = 0; c < t.transform[b][a].size(); ++c)
        os << b << ',' << layout_name(t.configs[b - 1][a].x) << ','
           << layout_name(t.configs[b][c].x) << ',' << t.transform[b][a][c] << '\n';
  return os.str();
}

inline std::string assignment_report(const CostTable& t, const Assignment& a) {
  std::ostringstream os;
  os << "# layout assignment\n";
  for (std::size_t i = 0; i < a.choice.size(); ++i) {
    const auto& c = t.configs[i][a.choice[i]];
    os << "layer " << i << ": layout=" << layout_name(c.x) << " dataflow=" << label(c.spec)
       << " cost=" << t.layer_cost[i][a.choice[i]];
    const double tr = i == 0 ? (t.input_cost.empty() ? 0 : t.input_cost[a.choice[0]])
                             : t.transform[i][a.choice[i - 1]][a.choice[i]];
    os << " transform_in=" << tr << '\n';
  }
  os << "total " << a.total << '\n';
  return os.str();
}

inline std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "rank,x,anchor,aux_input,aux_weight,aux_output,priority,cost\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& c = r.rows[i].candidate;
    os << i << ',' << c.x << ',' << to_string(c.spec.anchor) << ',' << c.spec.aux_input_vars << ','
       << c.spec.aux_weight_vars << ',' << c.spec.aux_output_vars << ','
       << priority_string(c.spec.priority, '>') << ',' << r.rows[i].cost << '\n';
  }
  return os.str();
}

}  // namespace yflow

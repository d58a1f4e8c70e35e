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
#include <vector>

#include "yflow/model.hpp"

namespace yflow {

/// Memory traffic saved per additional auxiliary vector variable, for one
/// (channel block, kernel) tile.
struct AuxGain {
  double delta_reads = 0;
  double delta_writes = 0;
};

/// How H and R are measured when evaluating the gain table.
///
/// `elements` uses tensor sizes H = ih*iw*x and R = fh*fw*x. `vector_ops` counts
/// x-wide memory instructions, so H = ih*iw and R = fh*fw; this is the unit the
/// simulator reports, and the two coincide at x = 1. E = oh*ow in both.
enum class GainUnits { elements, vector_ops };

/// Inputs shared by the windows of two horizontally adjacent outputs.
inline int input_reuse_count(const LayerConfig& layer) {
  layer.validate();
  if (layer.s > layer.fw) detail::fail("input_reuse_count requires s <= fw");
  return (layer.fw - layer.s) * layer.fh;
}

namespace detail {

struct GainSizes {
  double h, r, e;
};

inline GainSizes gain_sizes(const LayerConfig& layer, const VectorMachineConfig& vmc,
                            GainUnits units) {
  const double x = units == GainUnits::elements ? vmc.lanes() : 1.0;
  return {static_cast<double>(layer.ih) * layer.iw * x,
          static_cast<double>(layer.fh) * layer.fw * x,
          static_cast<double>(output_elements(layer))};
}

inline void require_range(double n, double lo, double hi, const char* row) {
  if (n < lo || n > hi)
    fail("variable index ", n, " outside [", lo, ", ", hi, "] for gain row ", row);
}

}  // namespace detail

/// Gain from allocating the `n`-th auxiliary vector variable (1-based) of type `aux`
/// under `anchor`. Rows outside their printed variable-index or stride ranges are
/// rejected, not extrapolated.
inline AuxGain aux_gain(Anchor anchor, DataKind aux, int n, const LayerConfig& layer,
                        const VectorMachineConfig& vmc, GainUnits units = GainUnits::elements) {
  layer.validate();
  vmc.validate();
  if (!aux_allowed(anchor, aux))
    detail::fail(to_string(aux), " cannot be auxiliary under the ", to_string(anchor), " anchor");
  const auto [H, R, E] = detail::gain_sizes(layer, vmc, units);
  const int s = layer.s, fw = layer.fw, fh = layer.fh;
  const bool reuse_stride = s >= 1 && s <= fw - 1;

  switch (anchor) {
    case Anchor::os:
      if (!reuse_stride) detail::fail("OS gain row requires 1 <= s <= fw-1");
      detail::require_range(n, 1, R, "OS/both");
      return {E, 0};
    case Anchor::ws:
      if (!reuse_stride) detail::fail("WS gain rows require 1 <= s <= fw-1");
      if (aux == DataKind::input) {
        detail::require_range(n, 1, H, "WS/input");
        return {R, 0};
      }
      detail::require_range(n, 1, E, "WS/output");
      return {R, R};
    case Anchor::is:
      break;
  }

  if (s == 1) {
    detail::require_range(n, 1, R, aux == DataKind::weight ? "IS/weight" : "IS/output");
    return aux == DataKind::weight ? AuxGain{H, 0} : AuxGain{H, H};
  }
  if (!reuse_stride) detail::fail("IS gain rows require 1 <= s <= fw-1");

  if (aux == DataKind::weight) {
    if (n >= 1 && n <= fw) return {H / s, 0};
    detail::require_range(n, fw + 1, 2 * fw, "IS/weight s>1");
    return {H / ((fw - s) * s), 0};
  }
  double d = 0;
  if (n == 1) {
    d = H + H / fw;
  } else if (n == 2) {
    d = layer.ih / static_cast<double>(fw - s) * (H + H / fw) +
        layer.ih / static_cast<double>(s) * (fw - s - 1);
  } else {
    detail::require_range(n, 3, 3 + fw - s, "IS/output s>1");
    d = static_cast<double>(fh - s) * (fw - s) * H / R;
  }
  return {d, d};
}

/// Expected latency order of the anchoring dataflows, fastest first. Advisory only.
inline std::vector<Anchor> rank_anchors(const LayerConfig& layer, const VectorMachineConfig&) {
  layer.validate();
  if (layer.s == 1) return {Anchor::os, Anchor::is, Anchor::ws};
  return {Anchor::os, Anchor::ws, Anchor::is};
}

/// Largest number of auxiliary variables of `aux` the generators can put to use.
inline int stash_capacity(Anchor anchor, DataKind aux, const LayerConfig& layer) {
  if (!aux_allowed(anchor, aux)) return 0;
  const int f = filter_positions(layer);
  switch (anchor) {
    case Anchor::os: return f;  // weights: R positions; inputs: one window
    case Anchor::is: return f;  // weights: R positions; outputs: one window
    case Anchor::ws:
      return aux == DataKind::output ? static_cast<int>(output_elements(layer))
                                     : layer.ih * layer.iw;
  }
  return 0;
}

/// Splits `budget` auxiliary variables over the auxiliary types allowed by `anchor`,
/// filling them in `priority` order up to each type's stash capacity.
inline DataflowSpec split_budget(Anchor anchor, int budget, std::vector<DataKind> priority,
                                 const LayerConfig& layer) {
  DataflowSpec spec;
  spec.anchor = anchor;
  spec.priority = priority;
  for (DataKind k : priority) {
    if (!aux_allowed(anchor, k)) continue;
    const int take = std::min(budget, stash_capacity(anchor, k, layer));
    spec.aux_vars(k) = take;
    budget -= take;
  }
  return spec;
}

/// Output anchoring with every spare variable given first to weights, then inputs.
inline DataflowSpec recommend(const LayerConfig& layer, const VectorMachineConfig& vmc) {
  layer.validate();
  vmc.validate();
  const int budget = vmc.num_var_available() - 3;
  DataflowSpec spec;
  spec.anchor = Anchor::os;
  spec.priority = {DataKind::weight, DataKind::input};
  spec.aux_weight_vars = std::min(budget, filter_positions(layer));
  spec.aux_input_vars = budget - spec.aux_weight_vars;
  return spec;
}

}  // namespace yflow

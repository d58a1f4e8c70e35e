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

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace yflow {

/// Raised for invalid layer/machine/dataflow descriptions and shape mismatches.
class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw config_error(concat(std::forward<Args>(args)...));
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Layer geometry
// ---------------------------------------------------------------------------

struct LayerConfig {
  int ih = 1, iw = 1;
  int ic = 1, oc = 1;
  int fh = 1, fw = 1;
  int s = 1;
  int pad = 0;

  void validate() const {
    if (ih < 1 || iw < 1 || ic < 1 || oc < 1 || fh < 1 || fw < 1)
      detail::fail("layer dimensions must be >= 1");
    if (s < 1) detail::fail("stride must be >= 1");
    if (pad < 0) detail::fail("padding must be >= 0");
    if (fh > ih + 2 * pad || fw > iw + 2 * pad)
      detail::fail("filter ", fh, "x", fw, " does not fit padded input ", ih + 2 * pad, "x",
                   iw + 2 * pad);
  }

  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

struct OutputDims {
  int oh = 0, ow = 0;
  friend bool operator==(const OutputDims&, const OutputDims&) = default;
};

inline OutputDims output_dims(const LayerConfig& layer) {
  layer.validate();
  OutputDims d{(layer.ih + 2 * layer.pad - layer.fh) / layer.s + 1,
               (layer.iw + 2 * layer.pad - layer.fw) / layer.s + 1};
  if (d.oh < 1 || d.ow < 1) detail::fail("layer produces an empty output");
  return d;
}

/// Number of vector positions in one filter (fh * fw).
inline int filter_positions(const LayerConfig& layer) { return layer.fh * layer.fw; }

/// Number of output elements per kernel (E = oh * ow).
inline std::int64_t output_elements(const LayerConfig& layer) {
  auto d = output_dims(layer);
  return static_cast<std::int64_t>(d.oh) * d.ow;
}

// ---------------------------------------------------------------------------
// Vector machine
// ---------------------------------------------------------------------------

struct VectorMachineConfig {
  int vec_reg_bits = 128;
  int vec_var_bits = 128;
  int num_vec_regs = 32;
  int elem_bits = 8;

  int lanes() const { return vec_var_bits / elem_bits; }  // x
  int regs_per_var() const { return vec_var_bits / vec_reg_bits; }
  int num_var_available() const { return num_vec_regs / regs_per_var(); }

  void validate() const {
    if (vec_reg_bits < 1 || vec_var_bits < 1 || num_vec_regs < 1 || elem_bits < 1)
      detail::fail("machine widths and register count must be positive");
    if (vec_var_bits % vec_reg_bits != 0)
      detail::fail("vec_var_bits (", vec_var_bits, ") must be a multiple of vec_reg_bits (",
                   vec_reg_bits, ")");
    if (vec_var_bits % elem_bits != 0)
      detail::fail("vec_var_bits (", vec_var_bits, ") must be a multiple of elem_bits (",
                   elem_bits, ")");
    if (num_var_available() < 3)
      detail::fail("register budget: only ", num_var_available(),
                   " vector variables fit, three are required");
  }

  friend bool operator==(const VectorMachineConfig&, const VectorMachineConfig&) = default;
};

/// Returns a copy of `vmc` whose vector variables hold `x` elements.
inline VectorMachineConfig with_lanes(VectorMachineConfig vmc, int x) {
  vmc.vec_var_bits = x * vmc.elem_bits;
  vmc.validate();
  return vmc;
}

inline std::int64_t channel_blocks(const LayerConfig& layer, const VectorMachineConfig& vmc) {
  return detail::ceil_div(layer.ic, vmc.lanes());
}

// ---------------------------------------------------------------------------
// Dataflows
// ---------------------------------------------------------------------------

enum class Anchor { is, ws, os };
enum class DataKind { input, weight, output };
enum class Mode { int8, binary };

inline std::string_view to_string(Anchor a) {
  switch (a) {
    case Anchor::is: return "is";
    case Anchor::ws: return "ws";
    case Anchor::os: return "os";
  }
  return "?";
}

inline std::string_view to_string(DataKind k) {
  switch (k) {
    case DataKind::input: return "input";
    case DataKind::weight: return "weight";
    case DataKind::output: return "output";
  }
  return "?";
}

inline std::string_view to_string(Mode m) { return m == Mode::int8 ? "int8" : "binary"; }

inline Anchor parse_anchor(std::string_view s) {
  if (s == "is" || s == "IS") return Anchor::is;
  if (s == "ws" || s == "WS") return Anchor::ws;
  if (s == "os" || s == "OS") return Anchor::os;
  detail::fail("unknown anchor '", s, "'");
}

inline DataKind parse_kind(std::string_view s) {
  if (s == "input") return DataKind::input;
  if (s == "weight") return DataKind::weight;
  if (s == "output") return DataKind::output;
  detail::fail("unknown data kind '", s, "'");
}

inline Mode parse_mode(std::string_view s) {
  if (s == "int8") return Mode::int8;
  if (s == "binary") return Mode::binary;
  detail::fail("unknown mode '", s, "'");
}

/// The data type whose stationarity anchors the loop nest.
inline DataKind anchored_kind(Anchor a) {
  switch (a) {
    case Anchor::is: return DataKind::input;
    case Anchor::ws: return DataKind::weight;
    case Anchor::os: return DataKind::output;
  }
  return DataKind::output;
}

inline bool aux_allowed(Anchor a, DataKind aux) { return anchored_kind(a) != aux; }

struct DataflowSpec {
  Anchor anchor = Anchor::os;
  int aux_input_vars = 0;
  int aux_weight_vars = 0;
  int aux_output_vars = 0;
  std::vector<DataKind> priority{DataKind::weight, DataKind::input, DataKind::output};

  int aux_vars(DataKind k) const {
    switch (k) {
      case DataKind::input: return aux_input_vars;
      case DataKind::weight: return aux_weight_vars;
      case DataKind::output: return aux_output_vars;
    }
    return 0;
  }
  int& aux_vars(DataKind k) {
    switch (k) {
      case DataKind::input: return aux_input_vars;
      case DataKind::weight: return aux_weight_vars;
      default: return aux_output_vars;
    }
  }
  int total_aux() const { return aux_input_vars + aux_weight_vars + aux_output_vars; }

  void validate(const VectorMachineConfig& vmc) const {
    if (aux_input_vars < 0 || aux_weight_vars < 0 || aux_output_vars < 0)
      detail::fail("auxiliary variable counts must be >= 0");
    for (DataKind k : {DataKind::input, DataKind::weight, DataKind::output})
      if (!aux_allowed(anchor, k) && aux_vars(k) != 0)
        detail::fail(to_string(k), " cannot be auxiliary under the ", to_string(anchor),
                     " anchor");
    if (3 + total_aux() > vmc.num_var_available())
      detail::fail("register budget exceeded: ", to_string(anchor), " with ", total_aux(),
                   " auxiliary variables needs ", 3 + total_aux(), " vector variables but only ",
                   vmc.num_var_available(), " are available");
  }

  friend bool operator==(const DataflowSpec&, const DataflowSpec&) = default;
};

// ---------------------------------------------------------------------------
// Tensors and layouts
// ---------------------------------------------------------------------------

/// NCHW and CKRS are unblocked; the _xc forms group channels into blocks of x lanes.
enum class Layout { nchw, nchw_xc, ckrs, ckrs_xc, khw_scalar };

struct PackedTensor {
  DataKind kind = DataKind::input;
  Layout layout = Layout::nchw;
  std::vector<int> dims;
  std::vector<std::int64_t> data;

  std::size_t expected_size() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }
  void check() const {
    if (data.size() != expected_size())
      detail::fail("tensor holds ", data.size(), " elements, dims require ", expected_size());
  }
};

inline std::int64_t nchw_xc_index(const LayerConfig& layer, const VectorMachineConfig& vmc,
                                  int c, int h, int w) {
  if (c < 0 || c >= layer.ic || h < 0 || h >= layer.ih || w < 0 || w >= layer.iw)
    detail::fail("input coordinate (", c, ",", h, ",", w, ") out of range");
  const std::int64_t x = vmc.lanes();
  return ((c / x * layer.ih + h) * layer.iw + w) * x + c % x;
}

inline std::int64_t ckrs_xc_index(const LayerConfig& layer, const VectorMachineConfig& vmc,
                                  int c, int k, int r, int sc) {
  if (c < 0 || c >= layer.ic || k < 0 || k >= layer.oc || r < 0 || r >= layer.fh || sc < 0 ||
      sc >= layer.fw)
    detail::fail("weight coordinate (", c, ",", k, ",", r, ",", sc, ") out of range");
  const std::int64_t x = vmc.lanes();
  return (((c / x * layer.oc + k) * layer.fh + r) * layer.fw + sc) * x + c % x;
}

inline std::int64_t khw_index(const LayerConfig& layer, int k, int h, int w) {
  auto d = output_dims(layer);
  if (k < 0 || k >= layer.oc || h < 0 || h >= d.oh || w < 0 || w >= d.ow)
    detail::fail("output coordinate (", k, ",", h, ",", w, ") out of range");
  return (static_cast<std::int64_t>(k) * d.oh + h) * d.ow + w;
}

inline PackedTensor make_nchw(DataKind kind, int c, int h, int w) {
  PackedTensor t{kind, Layout::nchw, {c, h, w}, {}};
  t.data.assign(t.expected_size(), 0);
  return t;
}

inline PackedTensor make_ckrs(int c, int k, int r, int s) {
  PackedTensor t{DataKind::weight, Layout::ckrs, {c, k, r, s}, {}};
  t.data.assign(t.expected_size(), 0);
  return t;
}

/// NCHW -> NCHW[xc]. Tail lanes of the last channel block are zero. `moved`, when
/// given, is incremented by the number of element writes performed, zero fill
/// included.
inline PackedTensor pack(const PackedTensor& t, int x, std::size_t* moved = nullptr) {
  if (t.layout != Layout::nchw || t.dims.size() != 3)
    detail::fail("pack expects an NCHW tensor");
  if (x < 1) detail::fail("block width must be >= 1");
  t.check();
  const int c = t.dims[0], h = t.dims[1], w = t.dims[2];
  const int blocks = static_cast<int>(detail::ceil_div(c, x));
  PackedTensor out{t.kind, Layout::nchw_xc, {blocks, h, w, x}, {}};
  out.data.assign(out.expected_size(), 0);
  for (int ci = 0; ci < c; ++ci)
    for (int hi = 0; hi < h; ++hi)
      for (int wi = 0; wi < w; ++wi)
        out.data[((static_cast<std::size_t>(ci / x) * h + hi) * w + wi) * x + ci % x] =
            t.data[(static_cast<std::size_t>(ci) * h + hi) * w + wi];
  if (moved) *moved += out.data.size();
  return out;
}

/// NCHW[xc] -> NCHW with `channels` real channels (tail lanes dropped).
inline PackedTensor unpack(const PackedTensor& t, int channels, std::size_t* moved = nullptr) {
  if (t.layout != Layout::nchw_xc || t.dims.size() != 4)
    detail::fail("unpack expects an NCHW[xc] tensor");
  t.check();
  const int blocks = t.dims[0], h = t.dims[1], w = t.dims[2], x = t.dims[3];
  if (channels < 1 || detail::ceil_div(channels, x) != blocks)
    detail::fail("unpack: ", channels, " channels do not match ", blocks, " blocks of ", x);
  PackedTensor out = make_nchw(t.kind, channels, h, w);
  std::size_t n = 0;
  for (int ci = 0; ci < channels; ++ci)
    for (int hi = 0; hi < h; ++hi)
      for (int wi = 0; wi < w; ++wi, ++n)
        out.data[(static_cast<std::size_t>(ci) * h + hi) * w + wi] =
            t.data[((static_cast<std::size_t>(ci / x) * h + hi) * w + wi) * x + ci % x];
  if (moved) *moved += n;
  return out;
}

/// CKRS -> CKRS[xc], blocking the input-channel dimension.
inline PackedTensor pack_weights(const PackedTensor& t, int x) {
  if (t.layout != Layout::ckrs || t.dims.size() != 4)
    detail::fail("pack_weights expects a CKRS tensor");
  if (x < 1) detail::fail("block width must be >= 1");
  t.check();
  const int c = t.dims[0], k = t.dims[1], r = t.dims[2], s = t.dims[3];
  const int blocks = static_cast<int>(detail::ceil_div(c, x));
  PackedTensor out{DataKind::weight, Layout::ckrs_xc, {blocks, k, r, s, x}, {}};
  out.data.assign(out.expected_size(), 0);
  for (int ci = 0; ci < c; ++ci)
    for (int ki = 0; ki < k; ++ki)
      for (int ri = 0; ri < r; ++ri)
        for (int si = 0; si < s; ++si)
          out.data[((((static_cast<std::size_t>(ci / x) * k + ki) * r + ri) * s + si) * x) +
                   ci % x] = t.data[((static_cast<std::size_t>(ci) * k + ki) * r + ri) * s + si];
  return out;
}

}  // namespace yflow

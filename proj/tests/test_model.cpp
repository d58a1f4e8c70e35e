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

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <tuple>

#include "yflow/model.hpp"

namespace {

using namespace yflow;

// Oracle: slide the filter along one padded axis and count placements that fit.
int placements(int in, int f, int s, int pad) {
  int n = 0;
  for (int start = 0; start + f <= in + 2 * pad; start += s) ++n;
  return n;
}

// Oracle: walk the blocked layout in storage order and record which coordinate
// lands at each offset.
std::map<std::tuple<int, int, int>, std::int64_t> walk_nchw_xc(int ic, int ih, int iw, int x) {
  std::map<std::tuple<int, int, int>, std::int64_t> at;
  std::int64_t offset = 0;
  for (int cb = 0; cb * x < ic; ++cb)
    for (int h = 0; h < ih; ++h)
      for (int w = 0; w < iw; ++w)
        for (int lane = 0; lane < x; ++lane, ++offset)
          if (cb * x + lane < ic) at[{cb * x + lane, h, w}] = offset;
  return at;
}

std::map<std::tuple<int, int, int, int>, std::int64_t> walk_ckrs_xc(int ic, int oc, int fh, int fw,
                                                                    int x) {
  std::map<std::tuple<int, int, int, int>, std::int64_t> at;
  std::int64_t offset = 0;
  for (int cb = 0; cb * x < ic; ++cb)
    for (int k = 0; k < oc; ++k)
      for (int r = 0; r < fh; ++r)
        for (int s = 0; s < fw; ++s)
          for (int lane = 0; lane < x; ++lane, ++offset)
            if (cb * x + lane < ic) at[{cb * x + lane, k, r, s}] = offset;
  return at;
}

VectorMachineConfig lanes(int x) { return {8 * x, 8 * x, 32, 8}; }

TEST(OutputDims, Examples) {
  EXPECT_EQ(output_dims({4, 4, 1, 1, 3, 3, 1, 0}).oh, 2);
  EXPECT_EQ(output_dims({112, 112, 1, 1, 3, 3, 2, 1}).oh, 56);
  EXPECT_EQ(output_dims({56, 56, 1, 1, 5, 5, 1, 0}).oh, placements(56, 5, 1, 0));
  EXPECT_EQ(placements(56, 5, 1, 0), 52);
}

TEST(OutputDims, MatchesPlacementCount) {
  for (int in = 1; in <= 12; ++in)
    for (int f = 1; f <= 5; ++f)
      for (int s = 1; s <= 3; ++s)
        for (int pad = 0; pad <= 2; ++pad) {
          if (f > in + 2 * pad) continue;
          LayerConfig l{in, in + 1, 1, 1, f, f, s, pad};
          if (f > l.iw + 2 * pad) continue;
          const auto d = output_dims(l);
          EXPECT_EQ(d.oh, placements(in, f, s, pad));
          EXPECT_EQ(d.ow, placements(in + 1, f, s, pad));
        }
}

TEST(LayerConfig, RejectsInvalid) {
  EXPECT_THROW((LayerConfig{0, 4, 1, 1, 1, 1, 1, 0}.validate()), config_error);
  EXPECT_THROW((LayerConfig{4, 4, 1, 1, 1, 1, 0, 0}.validate()), config_error);
  EXPECT_THROW((LayerConfig{4, 4, 1, 1, 1, 1, 1, -1}.validate()), config_error);
  EXPECT_THROW((LayerConfig{4, 4, 1, 1, 7, 3, 1, 1}.validate()), config_error);
  EXPECT_NO_THROW((LayerConfig{4, 4, 1, 1, 6, 6, 1, 1}.validate()));
}

TEST(VectorMachine, DerivedQuantities) {
  VectorMachineConfig v{128, 384, 32, 8};
  EXPECT_EQ(v.lanes(), 48);
  EXPECT_EQ(v.regs_per_var(), 3);
  EXPECT_EQ(v.num_var_available(), 10);
  EXPECT_THROW((VectorMachineConfig{128, 192, 32, 8}.validate()), config_error);
  try {
    VectorMachineConfig{128, 512, 8, 8}.validate();
    FAIL() << "expected a budget error";
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("register budget"), std::string::npos);
  }
  for (int ratio = 1; ratio <= 4; ++ratio) {
    VectorMachineConfig r{128, 128 * ratio, 32, 8};
    EXPECT_EQ(r.num_var_available(), 32 / ratio);
  }
}

TEST(DataflowSpec, CompatibilityAndBudget) {
  VectorMachineConfig v{128, 128, 8, 8};  // five auxiliaries fit
  DataflowSpec ok{Anchor::os, 2, 3, 0, {DataKind::weight, DataKind::input}};
  EXPECT_NO_THROW(ok.validate(v));
  DataflowSpec over = ok;
  over.aux_input_vars = 3;
  EXPECT_THROW(over.validate(v), config_error);
  EXPECT_THROW((DataflowSpec{Anchor::os, 0, 0, 1}.validate(v)), config_error);
  EXPECT_THROW((DataflowSpec{Anchor::ws, 0, 1, 0}.validate(v)), config_error);
  EXPECT_THROW((DataflowSpec{Anchor::is, 1, 0, 0}.validate(v)), config_error);
  EXPECT_NO_THROW((DataflowSpec{Anchor::is, 0, 2, 3}.validate(v)));
}

TEST(NchwXcIndex, Examples) {
  LayerConfig l{8, 8, 8, 1, 1, 1, 1, 0};
  EXPECT_EQ(nchw_xc_index(l, lanes(4), 0, 0, 0), 0);
  EXPECT_EQ(nchw_xc_index(l, lanes(4), 5, 0, 0), 257);
  EXPECT_EQ((walk_nchw_xc(8, 8, 8, 4).at({5, 0, 0})), 257);
  LayerConfig small{2, 2, 4, 1, 1, 1, 1, 0};
  EXPECT_EQ(nchw_xc_index(small, lanes(4), 3, 1, 1), 15);
  EXPECT_EQ((walk_nchw_xc(4, 2, 2, 4).at({3, 1, 1})), 15);
  EXPECT_THROW(nchw_xc_index(small, lanes(4), 4, 0, 0), config_error);
  EXPECT_THROW(nchw_xc_index(small, lanes(4), 0, 2, 0), config_error);
}

TEST(NchwXcIndex, MatchesStorageWalkAndIsInjective) {
  for (int x : {1, 2, 4, 8})
    for (int ic : {1, 3, 6, 8, 9}) {
      LayerConfig l{3, 5, ic, 1, 1, 1, 1, 0};
      const auto walk = walk_nchw_xc(ic, 3, 5, x);
      std::set<std::int64_t> seen;
      for (const auto& [coord, off] : walk) {
        const auto [c, h, w] = coord;
        EXPECT_EQ(nchw_xc_index(l, lanes(x), c, h, w), off);
        EXPECT_TRUE(seen.insert(off).second);
      }
    }
}

TEST(CkrsXcIndex, Examples) {
  LayerConfig l{4, 4, 8, 2, 3, 3, 1, 0};
  EXPECT_EQ(ckrs_xc_index(l, lanes(4), 0, 0, 0, 0), 0);
  EXPECT_EQ(ckrs_xc_index(l, lanes(4), 0, 1, 0, 0), 36);
  EXPECT_EQ(ckrs_xc_index(l, lanes(4), 4, 0, 1, 2), 92);
  const auto walk = walk_ckrs_xc(8, 2, 3, 3, 4);
  EXPECT_EQ((walk.at({0, 1, 0, 0})), 36);
  EXPECT_EQ((walk.at({4, 0, 1, 2})), 92);
  EXPECT_THROW(ckrs_xc_index(l, lanes(4), 0, 2, 0, 0), config_error);
}

TEST(CkrsXcIndex, MatchesStorageWalkAndIsInjective) {
  for (int x : {1, 4, 16})
    for (int ic : {2, 5, 16}) {
      LayerConfig l{5, 5, ic, 3, 2, 3, 1, 0};
      std::set<std::int64_t> seen;
      for (const auto& [coord, off] : walk_ckrs_xc(ic, 3, 2, 3, x)) {
        const auto [c, k, r, s] = coord;
        EXPECT_EQ(ckrs_xc_index(l, lanes(x), c, k, r, s), off);
        EXPECT_TRUE(seen.insert(off).second);
      }
    }
}

TEST(KhwIndex, SequentialTraversalIsIncreasing) {
  LayerConfig l{7, 6, 1, 3, 2, 3, 1, 1};
  const auto d = output_dims(l);
  std::int64_t prev = -1;
  for (int k = 0; k < l.oc; ++k)
    for (int h = 0; h < d.oh; ++h)
      for (int w = 0; w < d.ow; ++w) {
        const auto off = khw_index(l, k, h, w);
        EXPECT_GT(off, prev);
        prev = off;
      }
  EXPECT_EQ(prev + 1, l.oc * output_elements(l));
}

TEST(Pack, SingleChannelIsIdentity) {
  auto t = make_nchw(DataKind::input, 1, 3, 4);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<std::int64_t>(i) * 7 - 20;
  const auto p = pack(t, 1);
  EXPECT_EQ(p.data, t.data);
}

TEST(Pack, TailBlockIsZeroFilled) {
  auto t = make_nchw(DataKind::input, 6, 2, 2);
  for (auto& v : t.data) v = 9;
  const auto p = pack(t, 4);
  ASSERT_EQ(p.dims, (std::vector<int>{2, 2, 2, 4}));
  for (int h = 0; h < 2; ++h)
    for (int w = 0; w < 2; ++w)
      for (int lane = 0; lane < 4; ++lane)
        EXPECT_EQ(p.data[((1 * 2 + h) * 2 + w) * 4 + lane], lane < 2 ? 9 : 0);
}

TEST(Pack, RoundTripProperty) {
  std::mt19937 rng(1234);
  std::uniform_int_distribution<int> dim(1, 9), xs(1, 8), val(-128, 127);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = dim(rng), h = dim(rng), w = dim(rng), x = xs(rng);
    auto t = make_nchw(DataKind::input, c, h, w);
    for (auto& v : t.data) v = val(rng);
    std::size_t moved = 0;
    const auto p = pack(t, x, &moved);
    EXPECT_EQ(moved, p.data.size());
    EXPECT_EQ(unpack(p, c).data, t.data);
    // Each element sits where the index formula says.
    LayerConfig l{h, w, c, 1, 1, 1, 1, 0};
    VectorMachineConfig v{8 * x, 8 * x, 32, 8};
    for (int ci = 0; ci < c; ++ci)
      EXPECT_EQ(p.data[nchw_xc_index(l, v, ci, h - 1, w - 1)],
                t.data[(static_cast<std::size_t>(ci) * h + h - 1) * w + w - 1]);
  }
  const auto ex = [] {
    auto t = make_nchw(DataKind::input, 8, 3, 3);
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<std::int64_t>(i);
    return t;
  }();
  EXPECT_EQ(unpack(pack(ex, 4), 8).data, ex.data);
}

TEST(Pack, RejectsMismatches) {
  auto t = make_nchw(DataKind::input, 4, 2, 2);
  t.data.pop_back();
  EXPECT_THROW(pack(t, 2), config_error);
  const auto p = pack(make_nchw(DataKind::input, 4, 2, 2), 2);
  EXPECT_THROW(unpack(p, 5), config_error);
  EXPECT_THROW(unpack(make_nchw(DataKind::input, 4, 2, 2), 4), config_error);
}

TEST(PackWeights, MatchesIndexFormula) {
  LayerConfig l{4, 4, 6, 3, 2, 3, 1, 0};
  auto t = make_ckrs(6, 3, 2, 3);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<std::int64_t>(i) + 1;
  const auto p = pack_weights(t, 4);
  std::int64_t nonzero = 0;
  for (auto v : p.data) nonzero += v != 0;
  EXPECT_EQ(nonzero, static_cast<std::int64_t>(t.data.size()));
  for (int c = 0; c < 6; ++c)
    for (int k = 0; k < 3; ++k)
      for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 3; ++s)
          EXPECT_EQ(p.data[ckrs_xc_index(l, lanes(4), c, k, r, s)],
                    t.data[((static_cast<std::size_t>(c) * 3 + k) * 2 + r) * 3 + s]);
}

}  // namespace

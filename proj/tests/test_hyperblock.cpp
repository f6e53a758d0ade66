// Copyright 2026 The mhclite Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest/doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "birkhoff.hpp"
#include "hyperblock.hpp"
#include "mat.hpp"
#include "rng.hpp"
#include "sinkhorn.hpp"

namespace mhclite {
namespace {

Mat RandomInput(Rng& rng, std::size_t n, std::size_t c) {
  Mat x(n, c);
  for (double& e : x.data()) e = rng.Normal();
  return x;
}

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite})
    CHECK(VariantFromName(VariantName(v)) == v);
  CHECK(!VariantFromName("nonsense").has_value());
}

TEST_CASE("initialization reduces the block to the residual stream") {
  for (Variant v :
       {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite}) {
    const BlockParams p = InitParams(v, 4, 8);
    CHECK(p.w_pre.rows() == 32);
    CHECK(p.w_pre.cols() == 4);
    CHECK(p.w_res.cols() == (v == Variant::kMhcLite ? 24u : 16u));
    for (double e : p.w_pre.data()) CHECK(e == 0.0);
    for (double e : p.w_post.data()) CHECK(e == 0.0);
    for (double e : p.w_res.data()) CHECK(e == 0.0);
    CHECK(p.alpha_pre == 0.01);
    CHECK(p.alpha_post == 0.01);
    CHECK(p.alpha_res == 0.01);
    CHECK(p.b_pre[0] == 1.0);
    for (std::size_t i = 1; i < 4; ++i) CHECK(p.b_pre[i] == -1.0);
    CHECK(p.b_post[0] == 1.0);
    for (std::size_t i = 1; i < 4; ++i) CHECK(p.b_post[i] == -1.0);
  }
}

TEST_CASE("pick_index moves the live stream") {
  const BlockParams p = InitParams(Variant::kMhcLite, 4, 8, 2);
  CHECK(p.b_pre[2] == 1.0);
  CHECK(p.b_pre[0] == -1.0);
  CHECK_THROWS_AS(InitParams(Variant::kMhcLite, 4, 8, 4),
                  std::invalid_argument);
}

TEST_CASE("residual logit init favors the identity map") {
  const BlockParams mhc = InitParams(Variant::kMhc, 4, 8);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(mhc.b_res[i * 4 + j] == (i == j ? 0.0 : -8.0));

  const BlockParams lite = InitParams(Variant::kMhcLite, 4, 8);
  CHECK(lite.b_res[0] == 0.0);
  for (std::size_t k = 1; k < 24; ++k) CHECK(lite.b_res[k] == -8.0);

  // exp of the logit square sits within 3.4e-4 of the identity.
  Mat e(4, 4);
  for (std::size_t i = 0; i < 16; ++i)
    e.data()[i] = std::exp(mhc.b_res[i]);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(e(i, j) - (i == j ? 1.0 : 0.0)) <= 3.4e-4);
}

TEST_CASE("initial maps across variants") {
  Rng rng(3);
  const Mat x = RandomInput(rng, 4, 8);
  for (Variant v :
       {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite}) {
    const BlockParams p = InitParams(v, 4, 8);
    const MixMaps maps = ComputeMaps(p, x, 20);
    // sigma(+1) on the picked stream, sigma(-1) elsewhere.
    CHECK(std::abs(maps.h_pre[0] - 0.7310585786300049) <= 1e-6);
    for (std::size_t i = 1; i < 4; ++i)
      CHECK(std::abs(maps.h_pre[i] - 0.2689414213699951) <= 1e-6);
    CHECK(std::abs(maps.h_post[0] - 2.0 * 0.7310585786300049) <= 1e-6);
    for (std::size_t i = 1; i < 4; ++i)
      CHECK(std::abs(maps.h_post[i] - 2.0 * 0.2689414213699951) <= 1e-6);
    if (v == Variant::kUnconstrained) {
      // The raw reshape starts at the logits themselves, far from identity.
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
          CHECK(maps.h_res(i, j) == (i == j ? 0.0 : -8.0));
    } else {
      // The normalized heads start near the identity residual map.
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
          CHECK(std::abs(maps.h_res(i, j) - (i == j ? 1.0 : 0.0)) <= 0.01);
    }
  }
}

TEST_CASE("lite head mass concentrates on the identity permutation") {
  Rng rng(4);
  const Mat x = RandomInput(rng, 4, 8);
  const BlockParams p = InitParams(Variant::kMhcLite, 4, 8);
  const MixMaps maps = ComputeMaps(p, x, 20);
  REQUIRE(maps.a_weights.has_value());
  const std::vector<double>& a = *maps.a_weights;
  REQUIRE(a.size() == 24);
  const double expected = 1.0 / (1.0 + 23.0 * std::exp(-8.0));
  CHECK(std::abs(a[0] - expected) <= 1e-12);
  CHECK(a[0] >= 0.992);
  double sum = 0.0;
  for (double e : a) sum += e;
  CHECK(std::abs(sum - 1.0) <= 1e-14);
}

TEST_CASE("initial maps ignore the input entirely") {
  // Zero W makes the heads depend on biases alone.
  Rng rng(5);
  const Mat xa = RandomInput(rng, 4, 8);
  const Mat xb = RandomInput(rng, 4, 8);
  for (Variant v :
       {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite}) {
    const BlockParams p = InitParams(v, 4, 8);
    const MixMaps ma = ComputeMaps(p, xa, 20);
    const MixMaps mb = ComputeMaps(p, xb, 20);
    CHECK(ma.h_pre == mb.h_pre);
    CHECK(ma.h_post == mb.h_post);
    CHECK(ma.h_res == mb.h_res);
  }
}

TEST_CASE("head ranges are strict") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    for (Variant v :
         {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite}) {
      BlockParams p = InitParams(v, 4, 8);
      RandomizeParams(p, rng);
      const Mat x = RandomInput(rng, 4, 8);
      const MixMaps maps = ComputeMaps(p, x, 20);
      for (double e : maps.h_pre) {
        CHECK(e > 0.0);
        CHECK(e < 1.0);
      }
      for (double e : maps.h_post) {
        CHECK(e > 0.0);
        CHECK(e < 2.0);
      }
      CHECK(AllFinite(maps.h_res));
    }
  }
}

TEST_CASE("lite residual maps are doubly stochastic by construction") {
  Rng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    BlockParams p = InitParams(Variant::kMhcLite, 4, 8);
    RandomizeParams(p, rng);
    const Mat x = RandomInput(rng, 4, 8);
    const MixMaps maps = ComputeMaps(p, x, 20);
    worst = std::max(worst, DsError(maps.h_res).total);
  }
  CHECK(worst <= 1e-13);
}

TEST_CASE("mhc residual maps carry the SK signature") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    BlockParams p = InitParams(Variant::kMhc, 4, 8);
    RandomizeParams(p, rng);
    const Mat x = RandomInput(rng, 4, 8);
    const MixMaps maps = ComputeMaps(p, x, 20);
    // Rows exact after the closing row pass; columns only approximately.
    const DSError err = DsError(maps.h_res);
    CHECK(err.row_l1 <= 1e-12);
    REQUIRE(maps.sk_report.has_value());
    CHECK(maps.sk_report->l1_trace.size() ==
          maps.sk_report->iterations_run);
    CHECK(err.col_l1 == maps.sk_report->l1_trace.back().col_l1);
    REQUIRE(maps.pre_sk.has_value());
    for (double e : maps.pre_sk->data()) CHECK(e > 0.0);
  }
}

TEST_CASE("unconstrained maps are raw reshapes") {
  Rng rng(9);
  BlockParams p = InitParams(Variant::kUnconstrained, 4, 8);
  RandomizeParams(p, rng);
  const Mat x = RandomInput(rng, 4, 8);
  MapsCache cache;
  const MixMaps maps = ComputeMaps(p, x, 20, &cache);
  CHECK(!maps.a_weights.has_value());
  CHECK(!maps.pre_sk.has_value());
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(maps.h_res.data()[i] == cache.u_res[i]);
}

TEST_CASE("mhc consumes the iteration budget") {
  Rng rng(10);
  BlockParams p = InitParams(Variant::kMhc, 4, 8);
  RandomizeParams(p, rng);
  const Mat x = RandomInput(rng, 4, 8);
  const MixMaps one = ComputeMaps(p, x, 1);
  const MixMaps twenty = ComputeMaps(p, x, 20);
  CHECK(DsError(twenty.h_res).total < DsError(one.h_res).total);
  CHECK_THROWS_AS(ComputeMaps(p, x, 0), std::invalid_argument);

  // Lite ignores it.
  BlockParams q = InitParams(Variant::kMhcLite, 4, 8);
  RandomizeParams(q, rng);
  CHECK(ComputeMaps(q, x, 1).h_res == ComputeMaps(q, x, 20).h_res);
}

TEST_CASE("logit clamp keeps the mhc head finite") {
  BlockParams p = InitParams(Variant::kMhc, 4, 8);
  for (double& e : p.b_res) e = 500.0;
  p.b_res[0] = -500.0;
  Rng rng(11);
  const Mat x = RandomInput(rng, 4, 8);
  const MixMaps maps = ComputeMaps(p, x, 20);
  CHECK(AllFinite(maps.h_res));
  REQUIRE(maps.pre_sk.has_value());
  double hi = 0.0;
  for (double e : maps.pre_sk->data()) hi = std::max(hi, e);
  CHECK(hi <= std::exp(kLogitClamp) * (1.0 + 1e-12));
  CHECK(DsError(maps.h_res).row_l1 <= 1e-12);
}

TEST_CASE("identity residual map with a dead branch passes x through") {
  MixMaps maps;
  maps.h_pre = {0.5, 0.5, 0.5, 0.5};
  maps.h_post = {0.0, 0.0, 0.0, 0.0};
  maps.h_res = Mat::Identity(4);
  Rng rng(12);
  const Mat x = RandomInput(rng, 4, 8);
  const Mat out = ApplyBlock(maps, x, nullptr);
  CHECK(out == x);
}

TEST_CASE("zero branch reduces the block to the residual map") {
  Rng rng(13);
  BlockParams p = InitParams(Variant::kMhcLite, 4, 8);
  RandomizeParams(p, rng);
  const Mat x = RandomInput(rng, 4, 8);
  const BranchFn zero = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  const auto [y, maps] = BlockForward(p, x, zero, 20);
  const Mat expected = MatMul(maps.h_res, x);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(std::abs(y.data()[i] - expected.data()[i]) <= 1e-15);
}

TEST_CASE("lite blocks preserve per-channel mass through the residual path") {
  Rng rng(14);
  const BranchFn zero = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  for (int t = 0; t < 30; ++t) {
    BlockParams p = InitParams(Variant::kMhcLite, 4, 8);
    RandomizeParams(p, rng);
    const Mat x = RandomInput(rng, 4, 8);
    const auto [y, maps] = BlockForward(p, x, zero, 20);
    for (std::size_t c = 0; c < 8; ++c) {
      double before = 0.0, after = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        before += x(i, c);
        after += y(i, c);
      }
      CHECK(std::abs(after - before) <= 1e-10);
    }
  }
}

TEST_CASE("default branch is the identity") {
  Rng rng(15);
  BlockParams p = InitParams(Variant::kMhcLite, 4, 8);
  RandomizeParams(p, rng);
  const Mat x = RandomInput(rng, 4, 8);
  const auto [y1, m1] = BlockForward(p, x, nullptr, 20);
  const BranchFn copy = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };
  const auto [y2, m2] = BlockForward(p, x, copy, 20);
  CHECK(y1 == y2);
}

TEST_CASE("shape validation") {
  BlockParams p = InitParams(Variant::kMhcLite, 4, 8);
  Mat bad(3, 8);
  CHECK_THROWS_AS(ComputeMaps(p, bad, 20), std::invalid_argument);
  p.w_res = Mat(32, 16);  // lite expects 24 columns
  Rng rng(16);
  const Mat x = RandomInput(rng, 4, 8);
  CHECK_THROWS_AS(ComputeMaps(p, x, 20), std::invalid_argument);
  CHECK_THROWS_AS(ValidateParams(p), std::invalid_argument);
}

TEST_CASE("params survive a bit-exact json round-trip") {
  Rng rng(17);
  for (Variant v :
       {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite}) {
    BlockParams p = InitParams(v, 4, 8);
    RandomizeParams(p, rng);
    const BlockParams q = ParamsFromJson(ParamsToJson(p));
    CHECK(q.variant == p.variant);
    CHECK(q.n == p.n);
    CHECK(q.channels == p.channels);
    CHECK(q.w_pre == p.w_pre);
    CHECK(q.w_post == p.w_post);
    CHECK(q.w_res == p.w_res);
    CHECK(q.b_pre == p.b_pre);
    CHECK(q.b_post == p.b_post);
    CHECK(q.b_res == p.b_res);
    CHECK(q.alpha_pre == p.alpha_pre);
    CHECK(q.alpha_post == p.alpha_post);
    CHECK(q.alpha_res == p.alpha_res);
  }
}

TEST_CASE("params json rejects malformed input") {
  CHECK_THROWS_AS(ParamsFromJson("not json"), std::invalid_argument);
  CHECK_THROWS_AS(ParamsFromJson("{}"), std::invalid_argument);
  CHECK_THROWS_AS(ParamsFromJson(R"({"variant":"bogus"})"),
                  std::invalid_argument);
}

TEST_CASE("randomize is reproducible from the seed") {
  BlockParams a = InitParams(Variant::kMhc, 4, 8);
  BlockParams b = InitParams(Variant::kMhc, 4, 8);
  Rng ra(99), rb(99);
  RandomizeParams(a, ra);
  RandomizeParams(b, rb);
  CHECK(a.w_res == b.w_res);
  CHECK(a.b_res == b.b_res);
  CHECK(a.alpha_res == b.alpha_res);
}

}  // namespace
}  // namespace mhclite

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

#ifndef MHCLITE_HYPERBLOCK_H_
#define MHCLITE_HYPERBLOCK_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mat.hpp"
#include "rng.hpp"
#include "sinkhorn.hpp"

namespace mhclite {

// The three residual-mixing flavors: a raw-reshape baseline, the SK
// projection of exponentiated logits, and the exact permutation-basis
// combination.
enum class Variant { kUnconstrained = 0, kMhc = 1, kMhcLite = 2 };

const char* VariantName(Variant v);
std::optional<Variant> VariantFromName(std::string_view name);

// Learnable parameters of one residual block. The state is n streams of C
// channels; its row-major flatten (length nC) feeds the three map heads.
// The residual head width r is n*n for kUnconstrained/kMhc and n! for
// kMhcLite.
struct BlockParams {
  Variant variant = Variant::kMhcLite;
  std::size_t n = 0;
  std::size_t channels = 0;
  Mat w_pre;   // nC x n
  Mat w_post;  // nC x n
  Mat w_res;   // nC x r
  std::vector<double> b_pre;  // n
  std::vector<double> b_post;  // n
  std::vector<double> b_res;   // r
  double alpha_pre = 0.0;
  double alpha_post = 0.0;
  double alpha_res = 0.0;

  std::size_t flat_dim() const { return n * channels; }
  std::size_t res_dim() const;
};

// The per-token mixing maps. h_pre entries lie in (0,1), h_post in (0,2);
// for kMhcLite h_res is doubly stochastic by construction.
struct MixMaps {
  std::vector<double> h_pre;   // n
  std::vector<double> h_post;  // n
  Mat h_res;                   // n x n
  std::optional<std::vector<double>> a_weights;  // kMhcLite
  std::optional<Mat> pre_sk;                     // kMhc: exp(logits) before SK
  std::optional<SKReport> sk_report;             // kMhc
};

// Forward intermediates retained for the backward pass.
struct MapsCache {
  std::vector<double> xhat;       // flattened input
  double rms_scale = 0.0;         // sqrt(mean(xhat^2) + eps)
  std::vector<double> xhat_norm;  // xhat / rms_scale
  std::vector<double> z_pre, z_post, z_res;  // xhat_norm * W per head
  std::vector<double> u_pre, u_post, u_res;  // alpha * z + b (u_res unclamped)
  SKTrace sk_trace;                          // kMhc
};

// Zero weights, alphas = 0.01, pre/post biases -1 except +1 at pick_index,
// and residual logits biased toward the identity map: diagonal 0 with
// off-diagonal -8 for the n*n heads, entry 0 (identity permutation) = 0 with
// -8 elsewhere for the n! head.
BlockParams InitParams(Variant v, std::size_t n, std::size_t channels,
                       std::size_t pick_index = 0);

// Fills p with a reproducible random configuration: W entries
// N(0, scale/sqrt(nC)), pre/post biases U(-1,1), residual logits U(-2,0),
// alphas U(0.05, 0.3).
void RandomizeParams(BlockParams& p, Rng& rng, double scale = 1.0);

void ValidateParams(const BlockParams& p);

// Logit clamp applied before exp in the kMhc path.
inline constexpr double kLogitClamp = 40.0;

// Builds the three maps for input x (n x C). sk_iters (>= 1) is consumed
// only by the kMhc projection. Pure; pass a cache to retain backward-pass
// intermediates.
MixMaps ComputeMaps(const BlockParams& p, const Mat& x, std::size_t sk_iters,
                    MapsCache* cache = nullptr);

// The residual branch function: maps a 1xC row to a 1xC row.
using BranchFn =
    std::function<void(std::span<const double> in, std::span<double> out)>;

// x_next = h_res * x + h_post^T * f(h_pre * x). h_pre acts as a 1xn row
// combining streams; h_post^T expands the 1xC branch output back to n x C.
Mat ApplyBlock(const MixMaps& maps, const Mat& x, const BranchFn& f);

// ComputeMaps + ApplyBlock in one call.
std::pair<Mat, MixMaps> BlockForward(const BlockParams& p, const Mat& x,
                                     const BranchFn& f, std::size_t sk_iters);

// JSON (de)serialization with bit-exact f64 round-trip.
std::string ParamsToJson(const BlockParams& p);
BlockParams ParamsFromJson(const std::string& text);

}  // namespace mhclite

#endif  // MHCLITE_HYPERBLOCK_H_

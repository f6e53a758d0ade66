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

#ifndef MHCLITE_GRAD_H_
#define MHCLITE_GRAD_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hyperblock.hpp"
#include "mat.hpp"

namespace mhclite {

// Loss derivatives, shaped exactly like BlockParams.
struct ParamGrads {
  Mat w_pre, w_post, w_res;
  std::vector<double> b_pre, b_post, b_res;
  double alpha_pre = 0.0, alpha_post = 0.0, alpha_res = 0.0;
};

ParamGrads ZeroGradsLike(const BlockParams& p);

// dst += src, elementwise; shapes must match.
void AccumulateGrads(ParamGrads& dst, const ParamGrads& src);

// Aligned (parameter, gradient) scalar slots, in a fixed order; `decay`
// marks matrix-shaped parameters for decoupled weight decay. The references
// stay valid while p and g live at fixed addresses.
struct ScalarRef {
  double* param;
  double* grad;
  bool decay;
};
std::vector<ScalarRef> EnumerateScalars(BlockParams& p, ParamGrads& g);

// Adjoint of a branch function: given the branch input, its output, and the
// gradient with respect to the output, writes the gradient with respect to
// the input (and may accumulate the branch's own parameter gradients).
using BranchBackwardFn = std::function<void(
    std::span<const double> in, std::span<const double> out,
    std::span<const double> g_out, std::span<double> g_in)>;

struct BlockBackwardResult {
  ParamGrads grads;
  Mat input_grad;  // n x C
  Mat x_next;      // forward output, shared with the caller for free
  MixMaps maps;
};

// Reverse-mode derivatives of <upstream, BlockForward(p, x, f)> with respect
// to every parameter and the input, differentiating through RMSNorm, the
// sigmoid/softmax heads, exp, the unrolled SK run, and the permutation
// combination. f_backward must be the exact adjoint of f.
BlockBackwardResult BlockBackward(const BlockParams& p, const Mat& x,
                                  const BranchFn& f,
                                  const BranchBackwardFn& f_backward,
                                  const Mat& upstream, std::size_t sk_iters);

// Pulls a gradient back through the unrolled SK iterations captured in
// trace: result gradient in, pre-SK-matrix gradient out.
Mat SkBackward(const SKTrace& trace, const Mat& g_result);

// Central differences (loss(p + eps e) - loss(p - eps e)) / (2 eps) for
// every scalar parameter. eps must be > 0.
ParamGrads FiniteDiffGrad(const std::function<double(const BlockParams&)>& loss,
                          const BlockParams& p, double eps);

inline constexpr double kFdEps = 1e-5;
inline constexpr double kGradCheckTol = 1e-4;

// |a - b| / max(1e-8, |a| + |b|); the floor avoids 0/0 on dead parameters.
double RelErr(double a, double b);

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  Variant variant = Variant::kMhcLite;
  std::size_t n = 0, channels = 0;
  std::uint64_t seed = 0;
  std::vector<GradCheckGroup> groups;  // per parameter group plus "input"
  double worst = 0.0;
};

// Randomized analytic-vs-central-difference comparison on a squared-error
// loss with a tanh branch. Reports the max relative error per group.
GradCheckReport GradCheck(Variant v, std::size_t n, std::size_t channels,
                          std::uint64_t seed, std::size_t sk_iters = 20);

}  // namespace mhclite

#endif  // MHCLITE_GRAD_H_

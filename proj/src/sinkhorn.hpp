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

#ifndef MHCLITE_SINKHORN_H_
#define MHCLITE_SINKHORN_H_

#include <cstddef>
#include <vector>

#include "mat.hpp"

namespace mhclite {

// Outcome of a Sinkhorn-Knopp run. l1_trace holds one DSError per completed
// iteration, measured after that iteration's row pass; the run always ends on
// a row pass, so result row sums are 1 within 1e-12.
struct SKReport {
  Mat result;
  std::size_t iterations_run = 0;
  std::vector<DSError> l1_trace;
  bool converged = false;
};

// Everything the backward pass needs from an unrolled SK run: the matrix
// after each half-pass and the divisors each half-pass used.
struct SKTrace {
  std::vector<std::vector<double>> col_divisors;
  std::vector<std::vector<double>> row_divisors;
  std::vector<Mat> post_col;
  std::vector<Mat> post_row;
};

// One SK iteration: column normalization followed by row normalization.
// Requires a square nonnegative matrix; a row/column summing below 1e-300 is
// treated as zero and raises std::domain_error naming the index.
Mat SkStep(const Mat& m);

// Applies SkStep up to max_iters (>= 1) times, recording the l1 trace after
// each iteration and stopping early once the total drops to tol (>= 0; the
// default 0 runs the full budget). When trace is non-null the unrolled
// intermediates are captured for differentiation.
SKReport SkNormalize(const Mat& m, std::size_t max_iters, double tol = 0.0,
                     SKTrace* trace = nullptr);

// The ill-conditioned 3x3 scaling example [[0.5,a,a],[0.5,a,a],[a,1,1]].
// alpha must be finite and >= 0.
Mat AdverseMatrix(double alpha);

}  // namespace mhclite

#endif  // MHCLITE_SINKHORN_H_

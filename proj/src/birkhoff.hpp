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

#ifndef MHCLITE_BIRKHOFF_H_
#define MHCLITE_BIRKHOFF_H_

#include <cstddef>
#include <span>
#include <vector>

#include "mat.hpp"

namespace mhclite {

// All n! permutation matrices in lexicographic one-line order (identity
// first), plus their row-major flattenings stacked into the n! x n^2 combo
// matrix used for the single-product combination.
struct PermBasis {
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> one_line;
  std::vector<Mat> perms;
  Mat combo;
};

std::size_t Factorial(std::size_t n);

// n must lie in [1, 8].
PermBasis BuildBasis(std::size_t n);

// Process-wide immutable basis cache, built once per order.
const PermBasis& SharedBasis(std::size_t n);

// sum_k w[k] * P_k, computed as the (1 x n!) by (n! x n^2) product and
// reshaped to n x n. Linear in w; convex weights yield a doubly stochastic
// result up to rounding.
Mat Combine(const PermBasis& basis, std::span<const double> w);

// Greedy Birkhoff decomposition: repeatedly subtracts the support-contained
// permutation maximizing its minimum covered entry (ties to the lowest
// index). Input must satisfy DsError(m).total <= 1e-8; the result has at
// most (n-1)^2 + 1 nonzero weights and recombines to m within 1e-10.
std::vector<double> BirkhoffDecompose(const Mat& m, const PermBasis& basis);

}  // namespace mhclite

#endif  // MHCLITE_BIRKHOFF_H_

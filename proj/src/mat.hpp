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

#ifndef MHCLITE_MAT_H_
#define MHCLITE_MAT_H_

#include <cstddef>
#include <span>
#include <vector>

namespace mhclite {

// Dense row-major matrix of doubles. A matrix whose rows are residual
// streams and whose columns are channels flattens (via data()) to the
// stream-major vector the mixing maps consume.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), d_(rows * cols, 0.0) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return d_[i * cols_ + j];
  }

  std::span<double> data() { return d_; }
  std::span<const double> data() const { return d_; }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.d_ == b.d_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> d_;
};

// L1 distances of the row/column marginals from the all-ones vector.
struct DSError {
  double row_l1 = 0.0;
  double col_l1 = 0.0;
  double total = 0.0;
};

// C = A * B. Accumulation runs over the inner index in ascending order, so
// results are bit-reproducible. Throws std::invalid_argument on a dimension
// mismatch.
Mat MatMul(const Mat& a, const Mat& b);

std::vector<double> RowSums(const Mat& m);
std::vector<double> ColSums(const Mat& m);

// Requires a square matrix.
DSError DsError(const Mat& m);

// nu = (smallest strictly positive entry) / (largest entry). Entries must be
// nonnegative with at least one positive; violations raise std::domain_error.
double RelativeRange(const Mat& m);

// RMS normalization without a learned gain: v / sqrt(mean(v^2) + 1e-6).
inline constexpr double kRmsEps = 1e-6;
std::vector<double> RmsNorm(std::span<const double> v);

std::vector<double> SigmoidMap(std::span<const double> v);

// Numerically shifted softmax; the output sums to 1 up to rounding.
std::vector<double> SoftmaxMap(std::span<const double> v);

// All permutations of {0..n-1} in lexicographic order (identity first),
// in one-line notation: element i of a permutation is the column that row i
// maps to. n must lie in [1, 8]; larger n throws std::length_error.
std::vector<std::vector<std::size_t>> PermutationOneLine(std::size_t n);

// The same permutations as 0/1 matrices.
std::vector<Mat> EnumeratePermutations(std::size_t n);

bool AllFinite(const Mat& m);

}  // namespace mhclite

#endif  // MHCLITE_MAT_H_

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

#include "sinkhorn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mhclite {

namespace {

constexpr double kZeroSum = 1e-300;

void ValidateInput(const Mat& m) {
  if (m.rows() != m.cols() || m.empty()) {
    throw std::invalid_argument("SkStep: matrix must be square and nonempty, got " +
                                std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  }
  for (double x : m.data()) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::domain_error("SkStep: entries must be finite and nonnegative, found " +
                              std::to_string(x));
    }
  }
}

// Divides each column by its sum; divisors are reported through `sums`.
void ColPass(Mat& m, std::vector<double>& sums) {
  sums = ColSums(m);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    if (sums[j] < kZeroSum) {
      throw std::domain_error("SK column pass: column " + std::to_string(j) +
                              " sums to zero");
    }
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= sums[j];
  }
}

void RowPass(Mat& m, std::vector<double>& sums) {
  sums = RowSums(m);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (sums[i] < kZeroSum) {
      throw std::domain_error("SK row pass: row " + std::to_string(i) +
                              " sums to zero");
    }
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= sums[i];
  }
}

Mat StepImpl(const Mat& in, SKTrace* trace) {
  Mat m = in;
  std::vector<double> cs, rs;
  ColPass(m, cs);
  if (trace) {
    trace->col_divisors.push_back(std::move(cs));
    trace->post_col.push_back(m);
  }
  RowPass(m, rs);
  if (trace) {
    trace->row_divisors.push_back(std::move(rs));
    trace->post_row.push_back(m);
  }
  return m;
}

}  // namespace

Mat SkStep(const Mat& m) {
  ValidateInput(m);
  return StepImpl(m, nullptr);
}

SKReport SkNormalize(const Mat& m, std::size_t max_iters, double tol,
                     SKTrace* trace) {
  ValidateInput(m);
  if (max_iters < 1) {
    throw std::invalid_argument("SkNormalize: max_iters must be >= 1");
  }
  if (!(tol >= 0.0)) {
    throw std::invalid_argument("SkNormalize: tol must be >= 0");
  }
  SKReport rep;
  rep.result = m;
  for (std::size_t it = 0; it < max_iters; ++it) {
    rep.result = StepImpl(rep.result, trace);
    ++rep.iterations_run;
    rep.l1_trace.push_back(DsError(rep.result));
    if (rep.l1_trace.back().total <= tol) break;
  }
  rep.converged = rep.l1_trace.back().total <= tol;
  return rep;
}

Mat AdverseMatrix(double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw std::invalid_argument("AdverseMatrix: alpha must be finite and >= 0, got " +
                                std::to_string(alpha));
  }
  const double a = alpha;
  return Mat(3, 3, {0.5, a, a, 0.5, a, a, a, 1.0, 1.0});
}

}  // namespace mhclite

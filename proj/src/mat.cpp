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

#include "mat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mhclite {

namespace {

std::string Dims(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), d_(std::move(data)) {
  if (d_.size() != rows * cols) {
    throw std::invalid_argument("Mat: data length " + std::to_string(d_.size()) +
                                " does not match shape " + std::to_string(rows) +
                                "x" + std::to_string(cols));
  }
}

Mat Mat::Identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat MatMul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("MatMul: inner dimensions mismatch (" +
                                Dims(a) + " vs " + Dims(b) + ")");
  }
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c(i, j) += aik * b(k, j);
      }
    }
  }
  return c;
}

std::vector<double> RowSums(const Mat& m) {
  std::vector<double> s(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) s[i] += m(i, j);
  }
  return s;
}

std::vector<double> ColSums(const Mat& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += m(i, j);
  }
  return s;
}

DSError DsError(const Mat& m) {
  if (m.rows() != m.cols() || m.empty()) {
    throw std::invalid_argument("DsError: matrix must be square, got " +
                                Dims(m));
  }
  DSError e;
  for (double s : RowSums(m)) e.row_l1 += std::abs(s - 1.0);
  for (double s : ColSums(m)) e.col_l1 += std::abs(s - 1.0);
  e.total = e.row_l1 + e.col_l1;
  return e;
}

double RelativeRange(const Mat& m) {
  if (m.empty()) throw std::invalid_argument("RelativeRange: empty matrix");
  double min_pos = 0.0;
  double max = 0.0;
  bool has_pos = false;
  for (double x : m.data()) {
    if (x < 0.0) {
      throw std::domain_error("RelativeRange: negative entry " +
                              std::to_string(x));
    }
    if (x > 0.0 && (!has_pos || x < min_pos)) {
      min_pos = x;
      has_pos = true;
    }
    max = std::max(max, x);
  }
  if (!has_pos) {
    throw std::domain_error("RelativeRange: no strictly positive entry");
  }
  return min_pos / max;
}

std::vector<double> RmsNorm(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("RmsNorm: empty input");
  double ms = 0.0;
  for (double x : v) ms += x * x;
  ms /= static_cast<double>(v.size());
  const double s = std::sqrt(ms + kRmsEps);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / s;
  return out;
}

std::vector<double> SigmoidMap(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-v[i]));
  }
  return out;
}

std::vector<double> SoftmaxMap(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("SoftmaxMap: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

std::vector<std::vector<std::size_t>> PermutationOneLine(std::size_t n) {
  if (n < 1) throw std::invalid_argument("PermutationOneLine: n must be >= 1");
  if (n > 8) {
    throw std::length_error(
        "PermutationOneLine: n = " + std::to_string(n) +
        " exceeds the supported maximum of 8 (n! basis would be too large)");
  }
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> all;
  do {
    all.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return all;
}

std::vector<Mat> EnumeratePermutations(std::size_t n) {
  std::vector<Mat> mats;
  for (const auto& p : PermutationOneLine(n)) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, p[i]) = 1.0;
    mats.push_back(std::move(m));
  }
  return mats;
}

bool AllFinite(const Mat& m) {
  for (double x : m.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace mhclite

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

#include "birkhoff.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mhclite {

namespace {

constexpr double kSupportTol = 1e-12;
constexpr double kDsInputTol = 1e-8;

}  // namespace

std::size_t Factorial(std::size_t n) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) f *= k;
  return f;
}

PermBasis BuildBasis(std::size_t n) {
  PermBasis basis;
  basis.n = n;
  basis.one_line = PermutationOneLine(n);  // enforces 1 <= n <= 8
  basis.combo = Mat(basis.one_line.size(), n * n);
  for (std::size_t k = 0; k < basis.one_line.size(); ++k) {
    Mat p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      p(i, basis.one_line[k][i]) = 1.0;
      basis.combo(k, i * n + basis.one_line[k][i]) = 1.0;
    }
    basis.perms.push_back(std::move(p));
  }
  return basis;
}

const PermBasis& SharedBasis(std::size_t n) {
  if (n < 1 || n > 8) {
    throw std::length_error("SharedBasis: n = " + std::to_string(n) +
                            " outside the supported range [1, 8]");
  }
  static std::array<std::once_flag, 9> flags;
  static std::array<std::unique_ptr<const PermBasis>, 9> cache;
  std::call_once(flags[n],
                 [n] { cache[n] = std::make_unique<const PermBasis>(BuildBasis(n)); });
  return *cache[n];
}

Mat Combine(const PermBasis& basis, std::span<const double> w) {
  if (w.size() != basis.perms.size()) {
    throw std::invalid_argument("Combine: expected " +
                                std::to_string(basis.perms.size()) +
                                " weights, got " + std::to_string(w.size()));
  }
  Mat row(1, w.size(), std::vector<double>(w.begin(), w.end()));
  Mat flat = MatMul(row, basis.combo);
  return Mat(basis.n, basis.n,
             std::vector<double>(flat.data().begin(), flat.data().end()));
}

std::vector<double> BirkhoffDecompose(const Mat& m, const PermBasis& basis) {
  if (m.rows() != basis.n || m.cols() != basis.n) {
    throw std::invalid_argument("BirkhoffDecompose: matrix is " +
                                std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + " but basis order is " +
                                std::to_string(basis.n));
  }
  if (!AllFinite(m)) {
    throw std::domain_error("BirkhoffDecompose: matrix has non-finite entries");
  }
  for (double x : m.data()) {
    if (x < -kSupportTol) {
      throw std::domain_error("BirkhoffDecompose: negative entry " +
                              std::to_string(x));
    }
  }
  const DSError e = DsError(m);
  if (e.total > kDsInputTol) {
    throw std::domain_error(
        "BirkhoffDecompose: input is not doubly stochastic (l1 error " +
        std::to_string(e.total) + " > " + std::to_string(kDsInputTol) + ")");
  }

  Mat r = m;
  for (double& x : r.data()) x = std::max(x, 0.0);
  std::vector<double> w(basis.perms.size(), 0.0);

  // Each round zeroes at least one support entry, so n^2 rounds suffice.
  for (std::size_t round = 0; round <= basis.n * basis.n; ++round) {
    std::size_t best = w.size();
    double best_min = kSupportTol;
    for (std::size_t k = 0; k < basis.one_line.size(); ++k) {
      double lo = r(0, basis.one_line[k][0]);
      for (std::size_t i = 1; i < basis.n; ++i) {
        lo = std::min(lo, r(i, basis.one_line[k][i]));
      }
      if (lo > best_min) {  // strict: ties keep the lowest index
        best = k;
        best_min = lo;
      }
    }
    if (best == w.size()) break;
    w[best] += best_min;
    for (std::size_t i = 0; i < basis.n; ++i) {
      r(i, basis.one_line[best][i]) -= best_min;
    }
  }

  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (sum <= 0.0) {
    throw std::domain_error(
        "BirkhoffDecompose: no permutation fits the matrix support");
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace mhclite

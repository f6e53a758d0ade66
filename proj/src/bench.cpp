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

#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hyperblock.hpp"
#include "rng.hpp"

namespace mhclite {
namespace {

double MedianOf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  if (m % 2 == 1) return v[m / 2];
  return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

BenchResult BenchForward(std::size_t n, std::size_t channels,
                         std::size_t sk_iters, std::size_t reps,
                         std::size_t jobs, std::uint64_t seed) {
  if (reps < 1) throw std::invalid_argument("bench_forward: reps must be >= 1");
  if (jobs < 1 || jobs > 64) {
    throw std::invalid_argument("bench_forward: jobs must be in [1, 64]");
  }

  const Variant kVariants[3] = {Variant::kUnconstrained, Variant::kMhc,
                                Variant::kMhcLite};
  BlockParams params[3];
  Rng rng(seed);
  for (int v = 0; v < 3; ++v) {
    params[v] = InitParams(kVariants[v], n, channels);
    RandomizeParams(params[v], rng);
  }
  Mat x(n, channels);
  for (double& e : x.data()) e = rng.Normal();

  // Identity branch: the variants differ only in how the residual mixing
  // matrix is produced, so a heavyweight branch would just bury the signal.
  BranchFn id = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };

  std::vector<std::vector<double>> times(3);
  for (auto& t : times) t.resize(reps, 0.0);

  auto worker = [&](std::size_t lo, std::size_t hi) {
    using Clock = std::chrono::steady_clock;
    double sink = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      for (int v = 0; v < 3; ++v) {
        const auto t0 = Clock::now();
        auto [x_next, maps] = BlockForward(params[v], x, id, sk_iters);
        const auto t1 = Clock::now();
        times[v][r] = static_cast<double>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                .count());
        sink += x_next(0, 0);
      }
    }
    if (!std::isfinite(sink)) {
      throw std::runtime_error("bench_forward: non-finite forward output");
    }
  };

  if (jobs == 1) {
    worker(0, reps);
  } else {
    // Disjoint rep slices per thread; times land at fixed indices so the
    // merge order never depends on scheduling.
    std::vector<std::thread> pool;
    const std::size_t chunk = (reps + jobs - 1) / jobs;
    for (std::size_t j = 0; j < jobs; ++j) {
      const std::size_t lo = j * chunk;
      const std::size_t hi = std::min(reps, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  BenchResult out;
  out.n = n;
  out.channels = channels;
  out.sk_iters = sk_iters;
  out.reps = reps;
  out.jobs = jobs;
  out.median_ns_unconstrained = MedianOf(times[0]);
  out.median_ns_mhc = MedianOf(times[1]);
  out.median_ns_mhc_lite = MedianOf(times[2]);
  return out;
}

}  // namespace mhclite

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

#ifndef MHCLITE_BENCH_H_
#define MHCLITE_BENCH_H_

#include <cstdint>
#include <cstddef>

namespace mhclite {

struct BenchResult {
  std::size_t n = 0, channels = 0, sk_iters = 0, reps = 0, jobs = 0;
  double median_ns_unconstrained = 0.0;
  double median_ns_mhc = 0.0;
  double median_ns_mhc_lite = 0.0;
};

// Times one BlockForward call per rep for each variant on identical
// randomized parameters shapes and input, with an identity branch so the
// map-construction cost dominates. Reps are interleaved across variants;
// jobs > 1 splits reps over threads with a deterministic merge order (the
// timings themselves are wall clock, never deterministic).
BenchResult BenchForward(std::size_t n, std::size_t channels,
                         std::size_t sk_iters, std::size_t reps,
                         std::size_t jobs, std::uint64_t seed);

}  // namespace mhclite

#endif  // MHCLITE_BENCH_H_

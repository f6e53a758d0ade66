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

#ifndef MHCLITE_TOYTRAIN_H_
#define MHCLITE_TOYTRAIN_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grad.hpp"
#include "hyperblock.hpp"
#include "mat.hpp"

namespace mhclite {

// Synthetic regression batch: one sample per row.
struct Dataset {
  Mat inputs;   // samples x d_in
  Mat targets;  // samples x d_out
};

// Standard-normal inputs; targets from a fixed random tanh teacher
// (d_in -> 16 -> d_out). Deterministic under seed.
Dataset MakeTask(std::uint64_t seed, std::size_t d_in, std::size_t d_out,
                 std::size_t samples);

// The per-layer branch f: a two-layer perceptron C -> 4C -> C, tanh hidden.
struct BranchMlp {
  Mat w1;                  // C x 4C
  std::vector<double> b1;  // 4C
  Mat w2;                  // 4C x C
  std::vector<double> b2;  // C
};

struct ToyModel {
  Variant variant = Variant::kMhcLite;
  std::size_t n = 0, channels = 0, depth = 0;
  std::size_t d_in = 0, d_out = 0;
  std::size_t sk_iters = 20;
  std::vector<BlockParams> blocks;
  std::vector<BranchMlp> branches;
  Mat embed;    // d_in x nC
  Mat readout;  // C x d_out
};

// Blocks start at the reduced-to-residual initialization; embed, readout,
// and branches get scaled-normal weights with zero biases.
ToyModel MakeModel(Variant v, std::size_t n, std::size_t channels,
                   std::size_t depth, std::size_t d_in, std::size_t d_out,
                   std::uint64_t seed, std::size_t sk_iters = 20);

struct TrainRecord {
  std::size_t step = 0;
  double loss = 0.0;          // full-batch loss before the update
  double grad_norm = 0.0;     // global l2 norm after clipping
  double max_ds_error = 0.0;  // max ds_error(h_res).total over layers/samples
  double ms_per_step = 0.0;   // wall clock; everything else is deterministic
};

// Full-batch AdamW (beta1 0.9, beta2 0.95, decoupled weight decay 0.1 on
// matrix-shaped parameters), global-norm clip at 1.0, linear warmup over 2%
// of steps then cosine decay to lr/10. Single-threaded and bit-reproducible
// apart from the wall-clock column. A non-finite loss aborts with a
// std::runtime_error describing the step and batch.
std::vector<TrainRecord> Train(ToyModel& model, const Dataset& data,
                               std::size_t steps, double lr);

// Header `step,loss,grad_norm,max_ds_error,ms_per_step`; 17-digit floats.
std::string TrainLogCsv(std::span<const TrainRecord> log);
void WriteTrainLogCsv(std::span<const TrainRecord> log, const std::string& path);

struct HarvestRecord {
  std::size_t layer = 0;
  std::size_t token = 0;
  Mat h_res;
  std::optional<Mat> pre_sk;  // mhc only: exp(logits) before projection
};

struct Harvest {
  Variant variant = Variant::kMhcLite;
  std::size_t n = 0, channels = 0, depth = 0, tokens = 0, sk_iters = 20;
  std::vector<HarvestRecord> records;  // token-major, layer within token
};

// Records the residual maps (and pre-SK inputs for mhc) of the first
// `tokens` dataset rows in inference mode. tokens must be in [1, samples].
Harvest HarvestHres(const ToyModel& model, const Dataset& data,
                    std::size_t tokens);

std::string HarvestToJson(const Harvest& h);
Harvest HarvestFromJson(const std::string& text);

}  // namespace mhclite

#endif  // MHCLITE_TOYTRAIN_H_

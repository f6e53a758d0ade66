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

#include "toytrain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ioutil.hpp"
#include "rng.hpp"

namespace mhclite {

namespace {

using nlohmann::json;

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.95;
constexpr double kAdamEps = 1e-8;
constexpr double kWeightDecay = 0.1;
constexpr double kClipNorm = 1.0;
constexpr std::size_t kTeacherHidden = 16;

void FillNormal(Mat& m, Rng& rng, double scale) {
  for (double& x : m.data()) x = scale * rng.Normal();
}

struct BranchGrads {
  Mat w1, w2;
  std::vector<double> b1, b2;
};

BranchGrads ZeroBranchGrads(const BranchMlp& b) {
  BranchGrads g;
  g.w1 = Mat(b.w1.rows(), b.w1.cols());
  g.w2 = Mat(b.w2.rows(), b.w2.cols());
  g.b1.assign(b.b1.size(), 0.0);
  g.b2.assign(b.b2.size(), 0.0);
  return g;
}

void BranchForward(const BranchMlp& b, std::span<const double> in,
                   std::span<double> out) {
  const std::size_t hidden = b.b1.size();
  std::vector<double> h(hidden, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double xi = in[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < hidden; ++j) h[j] += xi * b.w1(i, j);
  }
  for (std::size_t j = 0; j < hidden; ++j) h[j] = std::tanh(h[j] + b.b1[j]);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = b.b2[c];
  for (std::size_t j = 0; j < hidden; ++j) {
    const double hj = h[j];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += hj * b.w2(j, c);
  }
}

// Recomputes the hidden activations from `in`, then runs the exact adjoint.
void BranchBackward(const BranchMlp& b, BranchGrads& g,
                    std::span<const double> in, std::span<const double> g_out,
                    std::span<double> g_in) {
  const std::size_t hidden = b.b1.size();
  std::vector<double> h(hidden, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double xi = in[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < hidden; ++j) h[j] += xi * b.w1(i, j);
  }
  for (std::size_t j = 0; j < hidden; ++j) h[j] = std::tanh(h[j] + b.b1[j]);

  std::vector<double> g_pre(hidden, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < g_out.size(); ++c) {
      g.w2(j, c) += h[j] * g_out[c];
      acc += b.w2(j, c) * g_out[c];
    }
    g_pre[j] = acc * (1.0 - h[j] * h[j]);
    g.b1[j] += g_pre[j];
  }
  for (std::size_t c = 0; c < g_out.size(); ++c) g.b2[c] += g_out[c];
  for (std::size_t i = 0; i < in.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      g.w1(i, j) += in[i] * g_pre[j];
      acc += b.w1(i, j) * g_pre[j];
    }
    g_in[i] = acc;
  }
}

struct ModelGrads {
  std::vector<ParamGrads> blocks;
  std::vector<BranchGrads> branches;
  Mat embed, readout;
};

ModelGrads ZeroModelGrads(const ToyModel& m) {
  ModelGrads g;
  for (const auto& b : m.blocks) g.blocks.push_back(ZeroGradsLike(b));
  for (const auto& b : m.branches) g.branches.push_back(ZeroBranchGrads(b));
  g.embed = Mat(m.embed.rows(), m.embed.cols());
  g.readout = Mat(m.readout.rows(), m.readout.cols());
  return g;
}

std::vector<ScalarRef> EnumerateModelScalars(ToyModel& m, ModelGrads& g) {
  std::vector<ScalarRef> refs;
  auto mat = [&refs](Mat& w, Mat& gw, bool decay) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      refs.push_back({&w.data()[i], &gw.data()[i], decay});
    }
  };
  auto vec = [&refs](std::vector<double>& b, std::vector<double>& gb) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      refs.push_back({&b[i], &gb[i], false});
    }
  };
  mat(m.embed, g.embed, true);
  for (std::size_t l = 0; l < m.blocks.size(); ++l) {
    auto block = EnumerateScalars(m.blocks[l], g.blocks[l]);
    refs.insert(refs.end(), block.begin(), block.end());
    mat(m.branches[l].w1, g.branches[l].w1, true);
    vec(m.branches[l].b1, g.branches[l].b1);
    mat(m.branches[l].w2, g.branches[l].w2, true);
    vec(m.branches[l].b2, g.branches[l].b2);
  }
  mat(m.readout, g.readout, true);
  return refs;
}

// Embeds one input row into the n x C stream state.
Mat EmbedInput(const ToyModel& m, std::span<const double> input) {
  std::vector<double> flat(m.n * m.channels, 0.0);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double xi = input[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < flat.size(); ++j) flat[j] += xi * m.embed(i, j);
  }
  return Mat(m.n, m.channels, std::move(flat));
}

std::vector<double> Readout(const ToyModel& m, const Mat& x_last,
                            std::vector<double>* pooled_out) {
  std::vector<double> pooled(m.channels, 0.0);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t c = 0; c < m.channels; ++c) pooled[c] += x_last(i, c);
  }
  for (double& v : pooled) v /= static_cast<double>(m.n);
  std::vector<double> y(m.d_out, 0.0);
  for (std::size_t c = 0; c < m.channels; ++c) {
    for (std::size_t o = 0; o < m.d_out; ++o) y[o] += pooled[c] * m.readout(c, o);
  }
  if (pooled_out) *pooled_out = std::move(pooled);
  return y;
}

double Schedule(double lr, std::size_t step, std::size_t steps) {
  const auto warmup = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(0.02 * static_cast<double>(steps))));
  if (step < warmup) {
    return lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const double min_lr = lr / 10.0;
  if (steps <= warmup) return min_lr;
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(steps - warmup);
  return min_lr + 0.5 * (lr - min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

json MatRows(const Mat& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat MatFromRows(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty()) {
    throw std::invalid_argument(std::string("harvest: ") + what +
                                " must be a nonempty array of rows");
  }
  const std::size_t r = rows.size();
  const std::size_t c = rows[0].is_array() ? rows[0].size() : 0;
  if (c == 0) {
    throw std::invalid_argument(std::string("harvest: ") + what +
                                " rows must be nonempty arrays");
  }
  Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (!rows[i].is_array() || rows[i].size() != c) {
      throw std::invalid_argument(std::string("harvest: ") + what +
                                  " rows have inconsistent lengths");
    }
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

}  // namespace

Dataset MakeTask(std::uint64_t seed, std::size_t d_in, std::size_t d_out,
                 std::size_t samples) {
  if (d_in < 1 || d_out < 1) {
    throw std::invalid_argument("MakeTask: d_in and d_out must be >= 1");
  }
  if (samples < 1) throw std::invalid_argument("MakeTask: samples must be >= 1");
  Rng rng(seed);
  Mat tw1(d_in, kTeacherHidden);
  FillNormal(tw1, rng, 1.0 / std::sqrt(static_cast<double>(d_in)));
  std::vector<double> tb1(kTeacherHidden);
  for (double& v : tb1) v = rng.Uniform(-0.5, 0.5);
  Mat tw2(kTeacherHidden, d_out);
  FillNormal(tw2, rng, 1.0 / std::sqrt(static_cast<double>(kTeacherHidden)));

  Dataset d;
  d.inputs = Mat(samples, d_in);
  FillNormal(d.inputs, rng, 1.0);
  d.targets = Mat(samples, d_out);
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> h(kTeacherHidden, 0.0);
    for (std::size_t i = 0; i < d_in; ++i) {
      for (std::size_t j = 0; j < kTeacherHidden; ++j) {
        h[j] += d.inputs(s, i) * tw1(i, j);
      }
    }
    for (std::size_t j = 0; j < kTeacherHidden; ++j) h[j] = std::tanh(h[j] + tb1[j]);
    for (std::size_t j = 0; j < kTeacherHidden; ++j) {
      for (std::size_t o = 0; o < d_out; ++o) d.targets(s, o) += h[j] * tw2(j, o);
    }
  }
  return d;
}

ToyModel MakeModel(Variant v, std::size_t n, std::size_t channels,
                   std::size_t depth, std::size_t d_in, std::size_t d_out,
                   std::uint64_t seed, std::size_t sk_iters) {
  if (depth < 1) throw std::invalid_argument("MakeModel: depth must be >= 1");
  if (d_in < 1 || d_out < 1) {
    throw std::invalid_argument("MakeModel: d_in and d_out must be >= 1");
  }
  if (sk_iters < 1) throw std::invalid_argument("MakeModel: sk_iters must be >= 1");
  ToyModel m;
  m.variant = v;
  m.n = n;
  m.channels = channels;
  m.depth = depth;
  m.d_in = d_in;
  m.d_out = d_out;
  m.sk_iters = sk_iters;
  Rng rng(seed);
  m.embed = Mat(d_in, n * channels);
  FillNormal(m.embed, rng, 1.0 / std::sqrt(static_cast<double>(d_in)));
  for (std::size_t l = 0; l < depth; ++l) {
    m.blocks.push_back(InitParams(v, n, channels));
    BranchMlp b;
    b.w1 = Mat(channels, 4 * channels);
    FillNormal(b.w1, rng, 1.0 / std::sqrt(static_cast<double>(channels)));
    b.b1.assign(4 * channels, 0.0);
    b.w2 = Mat(4 * channels, channels);
    FillNormal(b.w2, rng, 1.0 / std::sqrt(static_cast<double>(4 * channels)));
    b.b2.assign(channels, 0.0);
    m.branches.push_back(std::move(b));
  }
  m.readout = Mat(channels, d_out);
  FillNormal(m.readout, rng, 1.0 / std::sqrt(static_cast<double>(channels)));
  return m;
}

std::vector<TrainRecord> Train(ToyModel& model, const Dataset& data,
                               std::size_t steps, double lr) {
  if (steps < 1) throw std::invalid_argument("Train: steps must be >= 1");
  if (!std::isfinite(lr) || lr < 0.0) {
    throw std::invalid_argument("Train: lr must be finite and >= 0");
  }
  const std::size_t samples = data.inputs.rows();
  if (samples < 1 || data.targets.rows() != samples ||
      data.inputs.cols() != model.d_in || data.targets.cols() != model.d_out) {
    throw std::invalid_argument("Train: dataset shape does not match the model");
  }

  ModelGrads grads = ZeroModelGrads(model);
  const std::vector<ScalarRef> refs = EnumerateModelScalars(model, grads);
  std::vector<double> adam_m(refs.size(), 0.0), adam_v(refs.size(), 0.0);
  const double inv_samples = 1.0 / static_cast<double>(samples);

  std::vector<TrainRecord> log;
  log.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const ScalarRef& r : refs) *r.grad = 0.0;
    double loss = 0.0;
    double max_ds = 0.0;

    for (std::size_t s = 0; s < samples; ++s) {
      // Forward sweep, keeping each layer's input state.
      std::vector<Mat> states;
      states.reserve(model.depth + 1);
      states.push_back(EmbedInput(model, data.inputs.data().subspan(
                                             s * model.d_in, model.d_in)));
      for (std::size_t l = 0; l < model.depth; ++l) {
        const BranchMlp& mlp = model.branches[l];
        auto [next, maps] = BlockForward(
            model.blocks[l], states.back(),
            [&mlp](std::span<const double> in, std::span<double> o) {
              BranchForward(mlp, in, o);
            },
            model.sk_iters);
        max_ds = std::max(max_ds, DsError(maps.h_res).total);
        states.push_back(std::move(next));
      }
      std::vector<double> pooled;
      const std::vector<double> y = Readout(model, states.back(), &pooled);

      std::vector<double> g_y(model.d_out);
      for (std::size_t o = 0; o < model.d_out; ++o) {
        const double diff = y[o] - data.targets(s, o);
        loss += 0.5 * diff * diff * inv_samples;
        g_y[o] = diff * inv_samples;
      }

      // Readout and pooling adjoints.
      std::vector<double> g_pooled(model.channels, 0.0);
      for (std::size_t c = 0; c < model.channels; ++c) {
        for (std::size_t o = 0; o < model.d_out; ++o) {
          grads.readout(c, o) += pooled[c] * g_y[o];
          g_pooled[c] += model.readout(c, o) * g_y[o];
        }
      }
      Mat upstream(model.n, model.channels);
      for (std::size_t i = 0; i < model.n; ++i) {
        for (std::size_t c = 0; c < model.channels; ++c) {
          upstream(i, c) = g_pooled[c] / static_cast<double>(model.n);
        }
      }

      // Backward sweep.
      for (std::size_t l = model.depth; l-- > 0;) {
        const BranchMlp& mlp = model.branches[l];
        BranchGrads& mg = grads.branches[l];
        BlockBackwardResult res = BlockBackward(
            model.blocks[l], states[l],
            [&mlp](std::span<const double> in, std::span<double> o) {
              BranchForward(mlp, in, o);
            },
            [&mlp, &mg](std::span<const double> in, std::span<const double>,
                        std::span<const double> g_out, std::span<double> g_in) {
              BranchBackward(mlp, mg, in, g_out, g_in);
            },
            upstream, model.sk_iters);
        AccumulateGrads(grads.blocks[l], res.grads);
        upstream = std::move(res.input_grad);
      }

      // Embedding adjoint: x0 = input * embed.
      const auto g_x0 = upstream.data();
      for (std::size_t i = 0; i < model.d_in; ++i) {
        const double xi = data.inputs(s, i);
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < g_x0.size(); ++j) {
          grads.embed(i, j) += xi * g_x0[j];
        }
      }
    }

    if (!std::isfinite(loss)) {
      const auto in = data.inputs.data();
      const auto [in_lo, in_hi] = std::minmax_element(in.begin(), in.end());
      throw std::runtime_error(
          "Train: non-finite loss at step " + std::to_string(step) +
          " (batch of " + std::to_string(samples) + ", inputs in [" +
          std::to_string(*in_lo) + ", " + std::to_string(*in_hi) + "])");
    }

    double sq = 0.0;
    for (const ScalarRef& r : refs) sq += *r.grad * *r.grad;
    const double norm = std::sqrt(sq);
    if (norm > kClipNorm) {
      const double scale = kClipNorm / norm;
      for (const ScalarRef& r : refs) *r.grad *= scale;
    }
    const double clipped_norm = std::min(norm, kClipNorm);

    const double lr_t = Schedule(lr, step, steps);
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step + 1));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step + 1));
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const double g = *refs[k].grad;
      adam_m[k] = kBeta1 * adam_m[k] + (1.0 - kBeta1) * g;
      adam_v[k] = kBeta2 * adam_v[k] + (1.0 - kBeta2) * g * g;
      const double mh = adam_m[k] / bc1;
      const double vh = adam_v[k] / bc2;
      double update = mh / (std::sqrt(vh) + kAdamEps);
      if (refs[k].decay) update += kWeightDecay * *refs[k].param;
      *refs[k].param -= lr_t * update;
    }

    const auto t1 = std::chrono::steady_clock::now();
    TrainRecord rec;
    rec.step = step;
    rec.loss = loss;
    rec.grad_norm = clipped_norm;
    rec.max_ds_error = max_ds;
    rec.ms_per_step =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    log.push_back(rec);
  }
  return log;
}

std::string TrainLogCsv(std::span<const TrainRecord> log) {
  std::string out = "step,loss,grad_norm,max_ds_error,ms_per_step\n";
  for (const TrainRecord& r : log) {
    out += std::to_string(r.step);
    out += ',';
    out += FmtG17(r.loss);
    out += ',';
    out += FmtG17(r.grad_norm);
    out += ',';
    out += FmtG17(r.max_ds_error);
    out += ',';
    out += FmtG17(r.ms_per_step);
    out += '\n';
  }
  return out;
}

void WriteTrainLogCsv(std::span<const TrainRecord> log, const std::string& path) {
  WriteTextFile(path, TrainLogCsv(log));
}

Harvest HarvestHres(const ToyModel& model, const Dataset& data,
                    std::size_t tokens) {
  if (tokens < 1 || tokens > data.inputs.rows()) {
    throw std::invalid_argument("HarvestHres: tokens must be in [1, " +
                                std::to_string(data.inputs.rows()) + "], got " +
                                std::to_string(tokens));
  }
  if (data.inputs.cols() != model.d_in) {
    throw std::invalid_argument("HarvestHres: dataset width does not match the model");
  }
  Harvest h;
  h.variant = model.variant;
  h.n = model.n;
  h.channels = model.channels;
  h.depth = model.depth;
  h.tokens = tokens;
  h.sk_iters = model.sk_iters;
  for (std::size_t t = 0; t < tokens; ++t) {
    Mat x = EmbedInput(model, data.inputs.data().subspan(t * model.d_in, model.d_in));
    for (std::size_t l = 0; l < model.depth; ++l) {
      const BranchMlp& mlp = model.branches[l];
      auto [next, maps] = BlockForward(
          model.blocks[l], x,
          [&mlp](std::span<const double> in, std::span<double> o) {
            BranchForward(mlp, in, o);
          },
          model.sk_iters);
      HarvestRecord rec;
      rec.layer = l;
      rec.token = t;
      rec.h_res = std::move(maps.h_res);
      rec.pre_sk = std::move(maps.pre_sk);
      h.records.push_back(std::move(rec));
      x = std::move(next);
    }
  }
  return h;
}

std::string HarvestToJson(const Harvest& h) {
  json j;
  j["variant"] = VariantName(h.variant);
  j["n"] = h.n;
  j["channels"] = h.channels;
  j["depth"] = h.depth;
  j["tokens"] = h.tokens;
  j["sk_iters"] = h.sk_iters;
  json records = json::array();
  for (const HarvestRecord& r : h.records) {
    json jr;
    jr["layer"] = r.layer;
    jr["token"] = r.token;
    jr["h_res"] = MatRows(r.h_res);
    if (r.pre_sk) jr["pre_sk"] = MatRows(*r.pre_sk);
    records.push_back(std::move(jr));
  }
  j["records"] = std::move(records);
  return j.dump(1);
}

Harvest HarvestFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("harvest: parse failure: ") + e.what());
  }
  try {
    Harvest h;
    const auto name = j.at("variant").get<std::string>();
    const auto v = VariantFromName(name);
    if (!v) throw std::invalid_argument("harvest: unknown variant '" + name + "'");
    h.variant = *v;
    h.n = j.at("n").get<std::size_t>();
    h.channels = j.at("channels").get<std::size_t>();
    h.depth = j.at("depth").get<std::size_t>();
    h.tokens = j.at("tokens").get<std::size_t>();
    h.sk_iters = j.at("sk_iters").get<std::size_t>();
    for (const json& jr : j.at("records")) {
      HarvestRecord rec;
      rec.layer = jr.at("layer").get<std::size_t>();
      rec.token = jr.at("token").get<std::size_t>();
      rec.h_res = MatFromRows(jr.at("h_res"), "h_res");
      if (jr.contains("pre_sk")) {
        rec.pre_sk = MatFromRows(jr.at("pre_sk"), "pre_sk");
      }
      h.records.push_back(std::move(rec));
    }
    return h;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("harvest: missing or mistyped field: ") +
                                e.what());
  }
}

}  // namespace mhclite

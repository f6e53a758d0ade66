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

#include "hyperblock.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "birkhoff.hpp"

namespace mhclite {

namespace {

using nlohmann::json;

void CheckShape(const Mat& w, std::size_t rows, std::size_t cols,
                const char* name) {
  if (w.rows() != rows || w.cols() != cols) {
    throw std::invalid_argument(std::string(name) + " must be " +
                                std::to_string(rows) + "x" + std::to_string(cols) +
                                ", got " + std::to_string(w.rows()) + "x" +
                                std::to_string(w.cols()));
  }
}

// z = xn * W for a short output row; four input rows per pass keep the
// accumulator traffic off the critical path.
std::vector<double> HeadProduct(std::span<const double> xn, const Mat& w) {
  const std::size_t rows = w.rows(), cols = w.cols();
  std::vector<double> z(cols, 0.0);
  double* zp = z.data();
  const double* wp = w.data().data();
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    const double x0 = xn[i], x1 = xn[i + 1], x2 = xn[i + 2], x3 = xn[i + 3];
    const double* r0 = wp + i * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    for (std::size_t j = 0; j < cols; ++j)
      zp[j] += x0 * r0[j] + x1 * r1[j] + x2 * r2[j] + x3 * r3[j];
  }
  for (; i < rows; ++i) {
    const double xi = xn[i];
    const double* r = wp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) zp[j] += xi * r[j];
  }
  return z;
}

}  // namespace

const char* VariantName(Variant v) {
  switch (v) {
    case Variant::kUnconstrained:
      return "unconstrained";
    case Variant::kMhc:
      return "mhc";
    case Variant::kMhcLite:
      return "mhc-lite";
  }
  throw std::invalid_argument("VariantName: unknown variant");
}

std::optional<Variant> VariantFromName(std::string_view name) {
  if (name == "unconstrained") return Variant::kUnconstrained;
  if (name == "mhc") return Variant::kMhc;
  if (name == "mhc-lite") return Variant::kMhcLite;
  return std::nullopt;
}

std::size_t BlockParams::res_dim() const {
  return variant == Variant::kMhcLite ? Factorial(n) : n * n;
}

BlockParams InitParams(Variant v, std::size_t n, std::size_t channels,
                       std::size_t pick_index) {
  if (n < 1 || n > 8) {
    throw std::length_error("InitParams: n = " + std::to_string(n) +
                            " outside the supported range [1, 8]");
  }
  if (channels < 1) throw std::invalid_argument("InitParams: channels must be >= 1");
  if (pick_index >= n) {
    throw std::invalid_argument("InitParams: pick_index " +
                                std::to_string(pick_index) + " out of range for n = " +
                                std::to_string(n));
  }
  BlockParams p;
  p.variant = v;
  p.n = n;
  p.channels = channels;
  const std::size_t r = p.res_dim();
  p.w_pre = Mat(p.flat_dim(), n);
  p.w_post = Mat(p.flat_dim(), n);
  p.w_res = Mat(p.flat_dim(), r);
  p.b_pre.assign(n, -1.0);
  p.b_post.assign(n, -1.0);
  p.b_pre[pick_index] = 1.0;
  p.b_post[pick_index] = 1.0;
  if (v == Variant::kMhcLite) {
    p.b_res.assign(r, -8.0);
    p.b_res[0] = 0.0;  // identity permutation sits at basis index 0
  } else {
    p.b_res.assign(r, -8.0);
    for (std::size_t i = 0; i < n; ++i) p.b_res[i * n + i] = 0.0;
  }
  p.alpha_pre = p.alpha_post = p.alpha_res = 0.01;
  return p;
}

void RandomizeParams(BlockParams& p, Rng& rng, double scale) {
  const double s = scale / std::sqrt(static_cast<double>(p.flat_dim()));
  for (Mat* w : {&p.w_pre, &p.w_post, &p.w_res}) {
    for (double& x : w->data()) x = s * rng.Normal();
  }
  for (double& x : p.b_pre) x = rng.Uniform(-1.0, 1.0);
  for (double& x : p.b_post) x = rng.Uniform(-1.0, 1.0);
  for (double& x : p.b_res) x = rng.Uniform(-2.0, 0.0);
  p.alpha_pre = rng.Uniform(0.05, 0.3);
  p.alpha_post = rng.Uniform(0.05, 0.3);
  p.alpha_res = rng.Uniform(0.05, 0.3);
}

void ValidateParams(const BlockParams& p) {
  if (p.n < 1 || p.n > 8) {
    throw std::length_error("BlockParams: n = " + std::to_string(p.n) +
                            " outside the supported range [1, 8]");
  }
  if (p.channels < 1) throw std::invalid_argument("BlockParams: channels must be >= 1");
  const std::size_t r = p.res_dim();
  CheckShape(p.w_pre, p.flat_dim(), p.n, "w_pre");
  CheckShape(p.w_post, p.flat_dim(), p.n, "w_post");
  CheckShape(p.w_res, p.flat_dim(), r, "w_res");
  if (p.b_pre.size() != p.n || p.b_post.size() != p.n || p.b_res.size() != r) {
    throw std::invalid_argument("BlockParams: bias lengths inconsistent with n/variant");
  }
  for (const Mat* w : {&p.w_pre, &p.w_post, &p.w_res}) {
    if (!AllFinite(*w)) throw std::invalid_argument("BlockParams: non-finite weight");
  }
  for (const auto* b : {&p.b_pre, &p.b_post, &p.b_res}) {
    for (double x : *b) {
      if (!std::isfinite(x)) throw std::invalid_argument("BlockParams: non-finite bias");
    }
  }
  if (!std::isfinite(p.alpha_pre) || !std::isfinite(p.alpha_post) ||
      !std::isfinite(p.alpha_res)) {
    throw std::invalid_argument("BlockParams: non-finite alpha");
  }
}

MixMaps ComputeMaps(const BlockParams& p, const Mat& x, std::size_t sk_iters,
                    MapsCache* cache) {
  ValidateParams(p);
  if (x.rows() != p.n || x.cols() != p.channels) {
    throw std::invalid_argument("ComputeMaps: input must be " + std::to_string(p.n) +
                                "x" + std::to_string(p.channels) + ", got " +
                                std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()));
  }
  if (!AllFinite(x)) throw std::invalid_argument("ComputeMaps: non-finite input");
  if (p.variant == Variant::kMhc && sk_iters < 1) {
    throw std::invalid_argument("ComputeMaps: sk_iters must be >= 1 for the mhc variant");
  }

  const std::span<const double> flat = x.data();
  double ms = 0.0;
  for (double v : flat) ms += v * v;
  ms /= static_cast<double>(flat.size());
  const double scale = std::sqrt(ms + kRmsEps);
  std::vector<double> xn(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) xn[i] = flat[i] / scale;

  std::vector<double> z_pre = HeadProduct(xn, p.w_pre);
  std::vector<double> z_post = HeadProduct(xn, p.w_post);
  std::vector<double> z_res = HeadProduct(xn, p.w_res);
  auto affine = [](std::span<const double> z, std::span<const double> b,
                   double alpha) {
    std::vector<double> u(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) u[j] = alpha * z[j] + b[j];
    return u;
  };
  std::vector<double> u_pre = affine(z_pre, p.b_pre, p.alpha_pre);
  std::vector<double> u_post = affine(z_post, p.b_post, p.alpha_post);
  std::vector<double> u_res = affine(z_res, p.b_res, p.alpha_res);

  MixMaps maps;
  maps.h_pre = SigmoidMap(u_pre);
  maps.h_post = SigmoidMap(u_post);
  for (double& v : maps.h_post) v *= 2.0;

  switch (p.variant) {
    case Variant::kUnconstrained:
      maps.h_res = Mat(p.n, p.n, u_res);
      break;
    case Variant::kMhc: {
      Mat e(p.n, p.n);
      for (std::size_t i = 0; i < u_res.size(); ++i) {
        e.data()[i] = std::exp(std::clamp(u_res[i], -kLogitClamp, kLogitClamp));
      }
      maps.pre_sk = e;
      SKReport rep =
          SkNormalize(e, sk_iters, 0.0, cache ? &cache->sk_trace : nullptr);
      maps.h_res = rep.result;
      maps.sk_report = std::move(rep);
      break;
    }
    case Variant::kMhcLite: {
      std::vector<double> a = SoftmaxMap(u_res);
      maps.h_res = Combine(SharedBasis(p.n), a);
      maps.a_weights = std::move(a);
      break;
    }
  }

  if (cache) {
    cache->xhat.assign(flat.begin(), flat.end());
    cache->rms_scale = scale;
    cache->xhat_norm = std::move(xn);
    cache->z_pre = std::move(z_pre);
    cache->z_post = std::move(z_post);
    cache->z_res = std::move(z_res);
    cache->u_pre = std::move(u_pre);
    cache->u_post = std::move(u_post);
    cache->u_res = std::move(u_res);
  }
  return maps;
}

Mat ApplyBlock(const MixMaps& maps, const Mat& x, const BranchFn& f) {
  const std::size_t n = maps.h_res.rows();
  if (x.rows() != n || maps.h_pre.size() != n || maps.h_post.size() != n) {
    throw std::invalid_argument("ApplyBlock: maps/input stream counts disagree");
  }
  Mat out = MatMul(maps.h_res, x);

  std::vector<double> v(x.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) v[c] += maps.h_pre[i] * x(i, c);
  }
  std::vector<double> w(x.cols(), 0.0);
  if (f) {
    f(v, w);
  } else {
    w = v;  // null branch = identity
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) += maps.h_post[i] * w[c];
  }
  return out;
}

std::pair<Mat, MixMaps> BlockForward(const BlockParams& p, const Mat& x,
                                     const BranchFn& f, std::size_t sk_iters) {
  MixMaps maps = ComputeMaps(p, x, sk_iters);
  Mat next = ApplyBlock(maps, x, f);
  return {std::move(next), std::move(maps)};
}

std::string ParamsToJson(const BlockParams& p) {
  ValidateParams(p);
  json j;
  j["variant"] = VariantName(p.variant);
  j["n"] = p.n;
  j["channels"] = p.channels;
  j["alpha_pre"] = p.alpha_pre;
  j["alpha_post"] = p.alpha_post;
  j["alpha_res"] = p.alpha_res;
  j["b_pre"] = p.b_pre;
  j["b_post"] = p.b_post;
  j["b_res"] = p.b_res;
  auto flat = [](const Mat& w) {
    return std::vector<double>(w.data().begin(), w.data().end());
  };
  j["w_pre"] = flat(p.w_pre);
  j["w_post"] = flat(p.w_post);
  j["w_res"] = flat(p.w_res);
  return j.dump(2);
}

BlockParams ParamsFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("ParamsFromJson: parse failure: ") +
                                e.what());
  }
  try {
    BlockParams p;
    const auto name = j.at("variant").get<std::string>();
    const auto v = VariantFromName(name);
    if (!v) {
      throw std::invalid_argument("ParamsFromJson: unknown variant '" + name + "'");
    }
    p.variant = *v;
    p.n = j.at("n").get<std::size_t>();
    p.channels = j.at("channels").get<std::size_t>();
    p.alpha_pre = j.at("alpha_pre").get<double>();
    p.alpha_post = j.at("alpha_post").get<double>();
    p.alpha_res = j.at("alpha_res").get<double>();
    p.b_pre = j.at("b_pre").get<std::vector<double>>();
    p.b_post = j.at("b_post").get<std::vector<double>>();
    p.b_res = j.at("b_res").get<std::vector<double>>();
    if (p.n < 1 || p.n > 8 || p.channels < 1) {
      throw std::invalid_argument("ParamsFromJson: n/channels out of range");
    }
    auto unflat = [&](const char* key, std::size_t cols) {
      auto d = j.at(key).get<std::vector<double>>();
      if (d.size() != p.flat_dim() * cols) {
        throw std::invalid_argument(std::string("ParamsFromJson: ") + key +
                                    " has length " + std::to_string(d.size()) +
                                    ", expected " +
                                    std::to_string(p.flat_dim() * cols));
      }
      return Mat(p.flat_dim(), cols, std::move(d));
    };
    p.w_pre = unflat("w_pre", p.n);
    p.w_post = unflat("w_post", p.n);
    p.w_res = unflat("w_res", p.res_dim());
    ValidateParams(p);
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("ParamsFromJson: missing or mistyped field: ") +
                                e.what());
  }
}

}  // namespace mhclite

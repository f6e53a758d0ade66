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

#include "grad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "birkhoff.hpp"

namespace mhclite {

ParamGrads ZeroGradsLike(const BlockParams& p) {
  ParamGrads g;
  g.w_pre = Mat(p.w_pre.rows(), p.w_pre.cols());
  g.w_post = Mat(p.w_post.rows(), p.w_post.cols());
  g.w_res = Mat(p.w_res.rows(), p.w_res.cols());
  g.b_pre.assign(p.b_pre.size(), 0.0);
  g.b_post.assign(p.b_post.size(), 0.0);
  g.b_res.assign(p.b_res.size(), 0.0);
  return g;
}

void AccumulateGrads(ParamGrads& dst, const ParamGrads& src) {
  auto add_mat = [](Mat& d, const Mat& s) {
    if (d.rows() != s.rows() || d.cols() != s.cols()) {
      throw std::invalid_argument("AccumulateGrads: shape mismatch");
    }
    for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] += s.data()[i];
  };
  auto add_vec = [](std::vector<double>& d, const std::vector<double>& s) {
    if (d.size() != s.size()) {
      throw std::invalid_argument("AccumulateGrads: length mismatch");
    }
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  };
  add_mat(dst.w_pre, src.w_pre);
  add_mat(dst.w_post, src.w_post);
  add_mat(dst.w_res, src.w_res);
  add_vec(dst.b_pre, src.b_pre);
  add_vec(dst.b_post, src.b_post);
  add_vec(dst.b_res, src.b_res);
  dst.alpha_pre += src.alpha_pre;
  dst.alpha_post += src.alpha_post;
  dst.alpha_res += src.alpha_res;
}

std::vector<ScalarRef> EnumerateScalars(BlockParams& p, ParamGrads& g) {
  std::vector<ScalarRef> refs;
  auto mat = [&refs](Mat& w, Mat& gw) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      refs.push_back({&w.data()[i], &gw.data()[i], true});
    }
  };
  auto vec = [&refs](std::vector<double>& b, std::vector<double>& gb) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      refs.push_back({&b[i], &gb[i], false});
    }
  };
  mat(p.w_pre, g.w_pre);
  mat(p.w_post, g.w_post);
  mat(p.w_res, g.w_res);
  vec(p.b_pre, g.b_pre);
  vec(p.b_post, g.b_post);
  vec(p.b_res, g.b_res);
  refs.push_back({&p.alpha_pre, &g.alpha_pre, false});
  refs.push_back({&p.alpha_post, &g.alpha_post, false});
  refs.push_back({&p.alpha_res, &g.alpha_res, false});
  return refs;
}

Mat SkBackward(const SKTrace& trace, const Mat& g_result) {
  const std::size_t iters = trace.post_row.size();
  if (iters == 0 || trace.post_col.size() != iters ||
      trace.col_divisors.size() != iters || trace.row_divisors.size() != iters) {
    throw std::invalid_argument("SkBackward: trace is empty or inconsistent");
  }
  const std::size_t n = trace.post_row[0].rows();
  if (g_result.rows() != n || g_result.cols() != n) {
    throw std::invalid_argument("SkBackward: gradient shape mismatch");
  }
  // One normalization pass B = A / s divides a line by its sum s, so
  // gA = (gB - <gB, B>_line) / s along that line.
  Mat g = g_result;
  for (std::size_t t = iters; t-- > 0;) {
    const Mat& br = trace.post_row[t];
    const auto& rs = trace.row_divisors[t];
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * br(i, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) = (g(i, j) - dot) / rs[i];
    }
    const Mat& bc = trace.post_col[t];
    const auto& cs = trace.col_divisors[t];
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += g(i, j) * bc(i, j);
      for (std::size_t i = 0; i < n; ++i) g(i, j) = (g(i, j) - dot) / cs[j];
    }
  }
  return g;
}

BlockBackwardResult BlockBackward(const BlockParams& p, const Mat& x,
                                  const BranchFn& f,
                                  const BranchBackwardFn& f_backward,
                                  const Mat& upstream, std::size_t sk_iters) {
  if (upstream.rows() != p.n || upstream.cols() != p.channels) {
    throw std::invalid_argument("BlockBackward: upstream must be " +
                                std::to_string(p.n) + "x" +
                                std::to_string(p.channels));
  }
  const std::size_t n = p.n;
  const std::size_t nc = x.cols();

  MapsCache cache;
  BlockBackwardResult out;
  out.maps = ComputeMaps(p, x, sk_iters, &cache);
  const MixMaps& maps = out.maps;

  // Forward branch path (kept for the adjoint).
  std::vector<double> v(nc, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nc; ++c) v[c] += maps.h_pre[i] * x(i, c);
  }
  std::vector<double> w(nc, 0.0);
  if (f) {
    f(v, w);
  } else {
    w = v;
  }
  out.x_next = MatMul(maps.h_res, x);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nc; ++c) out.x_next(i, c) += maps.h_post[i] * w[c];
  }

  const Mat& g_y = upstream;
  out.grads = ZeroGradsLike(p);
  out.input_grad = Mat(n, nc);

  // Residual path: y += h_res x.
  Mat g_hres(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < nc; ++c) acc += g_y(i, c) * x(j, c);
      g_hres(i, j) = acc;
      for (std::size_t c = 0; c < nc; ++c) {
        out.input_grad(j, c) += maps.h_res(i, j) * g_y(i, c);
      }
    }
  }

  // Branch path: y += h_post^T w, w = f(v), v = h_pre x.
  std::vector<double> g_w(nc, 0.0), g_hpost(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nc; ++c) {
      g_w[c] += g_y(i, c) * maps.h_post[i];
      g_hpost[i] += g_y(i, c) * w[c];
    }
  }
  std::vector<double> g_v(nc, 0.0);
  if (f_backward) {
    f_backward(v, w, g_w, g_v);
  } else {
    g_v = g_w;
  }
  std::vector<double> g_hpre(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nc; ++c) {
      out.input_grad(i, c) += maps.h_pre[i] * g_v[c];
      g_hpre[i] += g_v[c] * x(i, c);
    }
  }

  // Map heads back to their pre-activation logits.
  std::vector<double> g_u_pre(n), g_u_post(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_u_pre[i] = g_hpre[i] * maps.h_pre[i] * (1.0 - maps.h_pre[i]);
    g_u_post[i] = g_hpost[i] * maps.h_post[i] * (1.0 - 0.5 * maps.h_post[i]);
  }
  std::vector<double> g_u_res(p.res_dim(), 0.0);
  switch (p.variant) {
    case Variant::kUnconstrained: {
      const auto gd = g_hres.data();
      g_u_res.assign(gd.begin(), gd.end());
      break;
    }
    case Variant::kMhc: {
      Mat g_e = SkBackward(cache.sk_trace, g_hres);
      const Mat& e = *maps.pre_sk;
      for (std::size_t idx = 0; idx < g_u_res.size(); ++idx) {
        const double u = cache.u_res[idx];
        const bool active = u > -kLogitClamp && u < kLogitClamp;
        g_u_res[idx] = active ? g_e.data()[idx] * e.data()[idx] : 0.0;
      }
      break;
    }
    case Variant::kMhcLite: {
      const auto& a = *maps.a_weights;
      const PermBasis& basis = SharedBasis(n);
      std::vector<double> g_a(a.size(), 0.0);
      for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
          g_a[k] += g_hres(i, basis.one_line[k][i]);
        }
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) dot += g_a[k] * a[k];
      for (std::size_t k = 0; k < a.size(); ++k) {
        g_u_res[k] = a[k] * (g_a[k] - dot);
      }
      break;
    }
  }

  // Affine heads: u = alpha z + b with z = W^T xhat_norm.
  std::vector<double> g_xn(cache.xhat_norm.size(), 0.0);
  auto head_back = [&](const Mat& w_mat, std::span<const double> z,
                       std::span<const double> g_u, double alpha, Mat& g_w_mat,
                       std::vector<double>& g_b, double& g_alpha) {
    for (std::size_t j = 0; j < g_u.size(); ++j) {
      g_b[j] += g_u[j];
      g_alpha += g_u[j] * z[j];
    }
    for (std::size_t i = 0; i < g_xn.size(); ++i) {
      const double xi = cache.xhat_norm[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < g_u.size(); ++j) {
        const double gz = alpha * g_u[j];
        g_w_mat(i, j) += xi * gz;
        acc += w_mat(i, j) * gz;
      }
      g_xn[i] += acc;
    }
  };
  head_back(p.w_pre, cache.z_pre, g_u_pre, p.alpha_pre, out.grads.w_pre,
            out.grads.b_pre, out.grads.alpha_pre);
  head_back(p.w_post, cache.z_post, g_u_post, p.alpha_post, out.grads.w_post,
            out.grads.b_post, out.grads.alpha_post);
  head_back(p.w_res, cache.z_res, g_u_res, p.alpha_res, out.grads.w_res,
            out.grads.b_res, out.grads.alpha_res);

  // RMSNorm: xhat_norm = xhat / s with s = sqrt(mean(xhat^2) + eps), so
  // g_xhat = g_xn / s - xhat <g_xn, xhat> / (m s^3).
  const double s = cache.rms_scale;
  const double m = static_cast<double>(cache.xhat.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < g_xn.size(); ++i) dot += g_xn[i] * cache.xhat[i];
  const double k = dot / (m * s * s * s);
  auto gi = out.input_grad.data();
  for (std::size_t i = 0; i < g_xn.size(); ++i) {
    gi[i] += g_xn[i] / s - cache.xhat[i] * k;
  }
  return out;
}

ParamGrads FiniteDiffGrad(const std::function<double(const BlockParams&)>& loss,
                          const BlockParams& p, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("FiniteDiffGrad: eps must be > 0");
  BlockParams q = p;
  ParamGrads g = ZeroGradsLike(q);
  for (const ScalarRef& r : EnumerateScalars(q, g)) {
    const double orig = *r.param;
    *r.param = orig + eps;
    const double up = loss(q);
    *r.param = orig - eps;
    const double down = loss(q);
    *r.param = orig;
    *r.grad = (up - down) / (2.0 * eps);
  }
  return g;
}

double RelErr(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

GradCheckReport GradCheck(Variant v, std::size_t n, std::size_t channels,
                          std::uint64_t seed, std::size_t sk_iters) {
  Rng rng(seed);
  BlockParams p = InitParams(v, n, channels);
  RandomizeParams(p, rng);
  Mat x(n, channels), target(n, channels);
  for (double& d : x.data()) d = rng.Normal();

  const BranchFn f = [](std::span<const double> in, std::span<double> o) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::tanh(in[i]);
  };
  const BranchBackwardFn fb = [](std::span<const double>,
                                 std::span<const double> o,
                                 std::span<const double> g_o,
                                 std::span<double> g_i) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      g_i[i] = g_o[i] * (1.0 - o[i] * o[i]);
    }
  };

  auto loss_at = [&](const BlockParams& q, const Mat& input) {
    auto [y, maps] = BlockForward(q, input, f, sk_iters);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y.data()[i] - target.data()[i];
      l += d * d;
    }
    return 0.5 * l;
  };

  auto [y, maps] = BlockForward(p, x, f, sk_iters);
  // The target hugs the base output: central-difference noise scales with
  // the loss value, and a large loss would drown the near-zero weight
  // gradients it is supposed to measure.
  for (std::size_t i = 0; i < y.size(); ++i) {
    target.data()[i] = y.data()[i] + 0.05 * rng.Normal();
  }
  Mat upstream(n, channels);
  for (std::size_t i = 0; i < y.size(); ++i) {
    upstream.data()[i] = y.data()[i] - target.data()[i];
  }
  BlockBackwardResult analytic = BlockBackward(p, x, f, fb, upstream, sk_iters);
  ParamGrads numeric = FiniteDiffGrad(
      [&](const BlockParams& q) { return loss_at(q, x); }, p, kFdEps);

  GradCheckReport rep;
  rep.variant = v;
  rep.n = n;
  rep.channels = channels;
  rep.seed = seed;

  auto group = [&](const std::string& name, std::span<const double> a,
                   std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, RelErr(a[i], b[i]));
    }
    rep.groups.push_back({name, worst});
  };
  group("w_pre", analytic.grads.w_pre.data(), numeric.w_pre.data());
  group("w_post", analytic.grads.w_post.data(), numeric.w_post.data());
  group("w_res", analytic.grads.w_res.data(), numeric.w_res.data());
  group("b_pre", analytic.grads.b_pre, numeric.b_pre);
  group("b_post", analytic.grads.b_post, numeric.b_post);
  group("b_res", analytic.grads.b_res, numeric.b_res);
  const double ap[] = {analytic.grads.alpha_pre, analytic.grads.alpha_post,
                       analytic.grads.alpha_res};
  const double np[] = {numeric.alpha_pre, numeric.alpha_post, numeric.alpha_res};
  group("alpha_pre", {&ap[0], 1}, {&np[0], 1});
  group("alpha_post", {&ap[1], 1}, {&np[1], 1});
  group("alpha_res", {&ap[2], 1}, {&np[2], 1});

  Mat fd_input(n, channels);
  {
    Mat xq = x;
    for (std::size_t i = 0; i < xq.size(); ++i) {
      const double orig = xq.data()[i];
      xq.data()[i] = orig + kFdEps;
      const double up = loss_at(p, xq);
      xq.data()[i] = orig - kFdEps;
      const double down = loss_at(p, xq);
      xq.data()[i] = orig;
      fd_input.data()[i] = (up - down) / (2.0 * kFdEps);
    }
  }
  group("input", analytic.input_grad.data(), fd_input.data());

  for (const auto& g : rep.groups) rep.worst = std::max(rep.worst, g.max_rel_err);
  return rep;
}

}  // namespace mhclite

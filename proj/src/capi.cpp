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

#define MHCLITE_BUILD

#include "mhclite.h"

#include <algorithm>
#include <cstring>
#include <map>
#include <new>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "analyze.hpp"
#include "bench.hpp"
#include "birkhoff.hpp"
#include "grad.hpp"
#include "hyperblock.hpp"
#include "mat.hpp"
#include "rng.hpp"
#include "sinkhorn.hpp"
#include "toytrain.hpp"

struct mhclite_mat {
  mhclite::Mat m;
};
struct mhclite_sk_report {
  mhclite::SKReport r;
};
struct mhclite_params {
  mhclite::BlockParams p;
};
struct mhclite_grad_report {
  mhclite::GradCheckReport r;
};
struct mhclite_dataset {
  mhclite::Dataset d;
};
struct mhclite_model {
  mhclite::ToyModel m;
};
struct mhclite_train_log {
  std::vector<mhclite::TrainRecord> rows;
};
struct mhclite_harvest {
  mhclite::Harvest h;
};
struct mhclite_report {
  std::vector<mhclite::StabilityStats> stats;
};

namespace {

thread_local std::string t_last_error;

mhclite_status Fail(mhclite_status code, const char* msg) {
  t_last_error = msg;
  return code;
}

mhclite_status NullArg(const char* name) {
  t_last_error = std::string(name) + ": null pointer";
  return MHCLITE_ERR_ARGUMENT;
}

template <typename Fn>
mhclite_status Wrap(Fn&& fn) noexcept {
  try {
    fn();
    return MHCLITE_OK;
  } catch (const std::invalid_argument& e) {
    return Fail(MHCLITE_ERR_ARGUMENT, e.what());
  } catch (const std::length_error& e) {
    return Fail(MHCLITE_ERR_CAPACITY, e.what());
  } catch (const std::domain_error& e) {
    return Fail(MHCLITE_ERR_DOMAIN, e.what());
  } catch (const std::exception& e) {
    return Fail(MHCLITE_ERR_RUNTIME, e.what());
  } catch (...) {
    return Fail(MHCLITE_ERR_RUNTIME, "unknown error");
  }
}

char* CopyString(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mhclite::Variant ToVariant(mhclite_variant v) {
  switch (v) {
    case MHCLITE_VARIANT_UNCONSTRAINED:
      return mhclite::Variant::kUnconstrained;
    case MHCLITE_VARIANT_MHC:
      return mhclite::Variant::kMhc;
    case MHCLITE_VARIANT_MHC_LITE:
      return mhclite::Variant::kMhcLite;
  }
  throw std::invalid_argument("variant: unknown enum value");
}

}  // namespace

extern "C" {

const char* mhclite_version(void) { return "0.1.0"; }

const char* mhclite_last_error(void) { return t_last_error.c_str(); }

void mhclite_string_free(char* s) { delete[] s; }

/* ---- matrices ---------------------------------------------------------- */

mhclite_status mhclite_mat_create(size_t rows, size_t cols, const double* data,
                                  mhclite_mat** out) {
  if (out == nullptr) return NullArg("mat_create.out");
  return Wrap([&] {
    mhclite::Mat m(rows, cols);
    if (data != nullptr) std::copy(data, data + rows * cols, m.data().begin());
    *out = new mhclite_mat{std::move(m)};
  });
}

void mhclite_mat_free(mhclite_mat* m) { delete m; }

size_t mhclite_mat_rows(const mhclite_mat* m) {
  return m == nullptr ? 0 : m->m.rows();
}

size_t mhclite_mat_cols(const mhclite_mat* m) {
  return m == nullptr ? 0 : m->m.cols();
}

mhclite_status mhclite_mat_read(const mhclite_mat* m, double* out,
                                size_t len) {
  if (m == nullptr) return NullArg("mat_read.m");
  if (out == nullptr) return NullArg("mat_read.out");
  if (len < m->m.size())
    return Fail(MHCLITE_ERR_ARGUMENT, "mat_read: buffer too small");
  std::copy(m->m.data().begin(), m->m.data().end(), out);
  return MHCLITE_OK;
}

mhclite_status mhclite_mat_col_sums(const mhclite_mat* m, double* out,
                                    size_t len) {
  if (m == nullptr) return NullArg("mat_col_sums.m");
  if (out == nullptr) return NullArg("mat_col_sums.out");
  if (len < m->m.cols())
    return Fail(MHCLITE_ERR_ARGUMENT, "mat_col_sums: buffer too small");
  return Wrap([&] {
    const std::vector<double> sums = mhclite::ColSums(m->m);
    std::copy(sums.begin(), sums.end(), out);
  });
}

mhclite_status mhclite_mat_ds_error(const mhclite_mat* m, double* row_l1,
                                    double* col_l1, double* total) {
  if (m == nullptr) return NullArg("mat_ds_error.m");
  return Wrap([&] {
    const mhclite::DSError e = mhclite::DsError(m->m);
    if (row_l1 != nullptr) *row_l1 = e.row_l1;
    if (col_l1 != nullptr) *col_l1 = e.col_l1;
    if (total != nullptr) *total = e.total;
  });
}

mhclite_status mhclite_mat_relative_range(const mhclite_mat* m, double* out) {
  if (m == nullptr) return NullArg("mat_relative_range.m");
  if (out == nullptr) return NullArg("mat_relative_range.out");
  return Wrap([&] { *out = mhclite::RelativeRange(m->m); });
}

/* ---- Sinkhorn-Knopp ----------------------------------------------------- */

mhclite_status mhclite_adverse_matrix(double alpha, mhclite_mat** out) {
  if (out == nullptr) return NullArg("adverse_matrix.out");
  return Wrap([&] { *out = new mhclite_mat{mhclite::AdverseMatrix(alpha)}; });
}

mhclite_status mhclite_sk_normalize(const mhclite_mat* m, size_t max_iters,
                                    double tol, mhclite_sk_report** out) {
  if (m == nullptr) return NullArg("sk_normalize.m");
  if (out == nullptr) return NullArg("sk_normalize.out");
  return Wrap([&] {
    *out = new mhclite_sk_report{mhclite::SkNormalize(m->m, max_iters, tol)};
  });
}

void mhclite_sk_report_free(mhclite_sk_report* r) { delete r; }

mhclite_status mhclite_sk_report_result(const mhclite_sk_report* r,
                                        mhclite_mat** out) {
  if (r == nullptr) return NullArg("sk_report_result.r");
  if (out == nullptr) return NullArg("sk_report_result.out");
  *out = new (std::nothrow) mhclite_mat{r->r.result};
  return *out == nullptr ? Fail(MHCLITE_ERR_RUNTIME, "allocation failed")
                         : MHCLITE_OK;
}

size_t mhclite_sk_report_iterations(const mhclite_sk_report* r) {
  return r == nullptr ? 0 : r->r.iterations_run;
}

int mhclite_sk_report_converged(const mhclite_sk_report* r) {
  return (r != nullptr && r->r.converged) ? 1 : 0;
}

size_t mhclite_sk_report_trace_len(const mhclite_sk_report* r) {
  return r == nullptr ? 0 : r->r.l1_trace.size();
}

mhclite_status mhclite_sk_report_trace(const mhclite_sk_report* r, double* out,
                                       size_t len) {
  if (r == nullptr) return NullArg("sk_report_trace.r");
  if (out == nullptr) return NullArg("sk_report_trace.out");
  if (len < 3 * r->r.l1_trace.size())
    return Fail(MHCLITE_ERR_ARGUMENT, "sk_report_trace: buffer too small");
  size_t k = 0;
  for (const mhclite::DSError& e : r->r.l1_trace) {
    out[k++] = e.row_l1;
    out[k++] = e.col_l1;
    out[k++] = e.total;
  }
  return MHCLITE_OK;
}

/* ---- permutation basis -------------------------------------------------- */

mhclite_status mhclite_factorial(size_t n, size_t* out) {
  if (out == nullptr) return NullArg("factorial.out");
  if (n > 20) return Fail(MHCLITE_ERR_ARGUMENT, "factorial: n > 20 overflows");
  return Wrap([&] { *out = mhclite::Factorial(n); });
}

mhclite_status mhclite_combine(size_t n, const double* weights, size_t len,
                               mhclite_mat** out) {
  if (weights == nullptr) return NullArg("combine.weights");
  if (out == nullptr) return NullArg("combine.out");
  return Wrap([&] {
    const mhclite::PermBasis& basis = mhclite::SharedBasis(n);
    *out = new mhclite_mat{
        mhclite::Combine(basis, std::span<const double>(weights, len))};
  });
}

mhclite_status mhclite_birkhoff_decompose(const mhclite_mat* m,
                                          double* weights, size_t weights_len,
                                          size_t* out_len) {
  if (m == nullptr) return NullArg("birkhoff_decompose.m");
  if (weights == nullptr) return NullArg("birkhoff_decompose.weights");
  return Wrap([&] {
    const mhclite::PermBasis& basis = mhclite::SharedBasis(m->m.rows());
    const std::vector<double> w = mhclite::BirkhoffDecompose(m->m, basis);
    if (weights_len < w.size())
      throw std::invalid_argument("birkhoff_decompose: buffer too small");
    std::copy(w.begin(), w.end(), weights);
    if (out_len != nullptr) *out_len = w.size();
  });
}

/* ---- hyperblock --------------------------------------------------------- */

mhclite_status mhclite_params_init(mhclite_variant variant, size_t n,
                                   size_t channels, size_t pick_index,
                                   mhclite_params** out) {
  if (out == nullptr) return NullArg("params_init.out");
  return Wrap([&] {
    *out = new mhclite_params{
        mhclite::InitParams(ToVariant(variant), n, channels, pick_index)};
  });
}

void mhclite_params_free(mhclite_params* p) { delete p; }

mhclite_status mhclite_params_randomize(mhclite_params* p, uint64_t seed,
                                        double scale) {
  if (p == nullptr) return NullArg("params_randomize.p");
  return Wrap([&] {
    mhclite::Rng rng(seed);
    mhclite::RandomizeParams(p->p, rng, scale);
  });
}

mhclite_status mhclite_params_to_json(const mhclite_params* p, char** out) {
  if (p == nullptr) return NullArg("params_to_json.p");
  if (out == nullptr) return NullArg("params_to_json.out");
  return Wrap([&] { *out = CopyString(mhclite::ParamsToJson(p->p)); });
}

mhclite_status mhclite_params_from_json(const char* json,
                                        mhclite_params** out) {
  if (json == nullptr) return NullArg("params_from_json.json");
  if (out == nullptr) return NullArg("params_from_json.out");
  return Wrap([&] {
    *out = new mhclite_params{mhclite::ParamsFromJson(std::string(json))};
  });
}

mhclite_status mhclite_block_forward(const mhclite_params* p,
                                     const mhclite_mat* x, size_t sk_iters,
                                     mhclite_branch_fn f, void* ctx,
                                     mhclite_mat** x_next,
                                     mhclite_mat** h_res_out,
                                     mhclite_mat** pre_sk_out) {
  if (p == nullptr) return NullArg("block_forward.p");
  if (x == nullptr) return NullArg("block_forward.x");
  if (x_next == nullptr) return NullArg("block_forward.x_next");
  return Wrap([&] {
    mhclite::BranchFn branch;
    if (f != nullptr) {
      branch = [f, ctx](std::span<const double> in, std::span<double> out) {
        f(in.data(), out.data(), in.size(), ctx);
      };
    }
    auto [next, maps] = mhclite::BlockForward(p->p, x->m, branch, sk_iters);
    *x_next = new mhclite_mat{std::move(next)};
    if (h_res_out != nullptr)
      *h_res_out = new mhclite_mat{std::move(maps.h_res)};
    if (pre_sk_out != nullptr) {
      *pre_sk_out = maps.pre_sk.has_value()
                        ? new mhclite_mat{std::move(*maps.pre_sk)}
                        : nullptr;
    }
  });
}

/* ---- gradient checks ---------------------------------------------------- */

mhclite_status mhclite_grad_check(mhclite_variant variant, size_t n,
                                  size_t channels, uint64_t seed,
                                  size_t sk_iters, mhclite_grad_report** out) {
  if (out == nullptr) return NullArg("grad_check.out");
  return Wrap([&] {
    *out = new mhclite_grad_report{
        mhclite::GradCheck(ToVariant(variant), n, channels, seed, sk_iters)};
  });
}

void mhclite_grad_report_free(mhclite_grad_report* r) { delete r; }

size_t mhclite_grad_report_group_count(const mhclite_grad_report* r) {
  return r == nullptr ? 0 : r->r.groups.size();
}

const char* mhclite_grad_report_group_name(const mhclite_grad_report* r,
                                           size_t index) {
  if (r == nullptr || index >= r->r.groups.size()) return nullptr;
  return r->r.groups[index].name.c_str();
}

mhclite_status mhclite_grad_report_group_err(const mhclite_grad_report* r,
                                             size_t index, double* out) {
  if (r == nullptr) return NullArg("grad_report_group_err.r");
  if (out == nullptr) return NullArg("grad_report_group_err.out");
  if (index >= r->r.groups.size())
    return Fail(MHCLITE_ERR_ARGUMENT, "grad_report_group_err: index range");
  *out = r->r.groups[index].max_rel_err;
  return MHCLITE_OK;
}

mhclite_status mhclite_grad_report_worst(const mhclite_grad_report* r,
                                         double* out) {
  if (r == nullptr) return NullArg("grad_report_worst.r");
  if (out == nullptr) return NullArg("grad_report_worst.out");
  *out = r->r.worst;
  return MHCLITE_OK;
}

/* ---- toy training ------------------------------------------------------- */

mhclite_status mhclite_make_task(uint64_t seed, size_t d_in, size_t d_out,
                                 size_t samples, mhclite_dataset** out) {
  if (out == nullptr) return NullArg("make_task.out");
  return Wrap([&] {
    *out = new mhclite_dataset{mhclite::MakeTask(seed, d_in, d_out, samples)};
  });
}

void mhclite_dataset_free(mhclite_dataset* d) { delete d; }

mhclite_status mhclite_make_model(mhclite_variant variant, size_t n,
                                  size_t channels, size_t depth, size_t d_in,
                                  size_t d_out, size_t sk_iters, uint64_t seed,
                                  mhclite_model** out) {
  if (out == nullptr) return NullArg("make_model.out");
  return Wrap([&] {
    *out = new mhclite_model{mhclite::MakeModel(
        ToVariant(variant), n, channels, depth, d_in, d_out, seed, sk_iters)};
  });
}

void mhclite_model_free(mhclite_model* m) { delete m; }

mhclite_status mhclite_train(mhclite_model* m, const mhclite_dataset* d,
                             size_t steps, double lr, mhclite_train_log** out) {
  if (m == nullptr) return NullArg("train.m");
  if (d == nullptr) return NullArg("train.d");
  if (out == nullptr) return NullArg("train.out");
  return Wrap([&] {
    *out = new mhclite_train_log{mhclite::Train(m->m, d->d, steps, lr)};
  });
}

void mhclite_train_log_free(mhclite_train_log* l) { delete l; }

size_t mhclite_train_log_len(const mhclite_train_log* l) {
  return l == nullptr ? 0 : l->rows.size();
}

mhclite_status mhclite_train_log_row(const mhclite_train_log* l, size_t index,
                                     size_t* step, double* loss,
                                     double* grad_norm, double* max_ds_error,
                                     double* ms_per_step) {
  if (l == nullptr) return NullArg("train_log_row.l");
  if (index >= l->rows.size())
    return Fail(MHCLITE_ERR_ARGUMENT, "train_log_row: index range");
  const mhclite::TrainRecord& r = l->rows[index];
  if (step != nullptr) *step = r.step;
  if (loss != nullptr) *loss = r.loss;
  if (grad_norm != nullptr) *grad_norm = r.grad_norm;
  if (max_ds_error != nullptr) *max_ds_error = r.max_ds_error;
  if (ms_per_step != nullptr) *ms_per_step = r.ms_per_step;
  return MHCLITE_OK;
}

mhclite_status mhclite_train_log_csv(const mhclite_train_log* l, char** out) {
  if (l == nullptr) return NullArg("train_log_csv.l");
  if (out == nullptr) return NullArg("train_log_csv.out");
  return Wrap([&] { *out = CopyString(mhclite::TrainLogCsv(l->rows)); });
}

mhclite_status mhclite_harvest_run(const mhclite_model* m,
                                   const mhclite_dataset* d, size_t tokens,
                                   mhclite_harvest** out) {
  if (m == nullptr) return NullArg("harvest_run.m");
  if (d == nullptr) return NullArg("harvest_run.d");
  if (out == nullptr) return NullArg("harvest_run.out");
  return Wrap([&] {
    *out = new mhclite_harvest{mhclite::HarvestHres(m->m, d->d, tokens)};
  });
}

void mhclite_harvest_free(mhclite_harvest* h) { delete h; }

mhclite_status mhclite_harvest_to_json(const mhclite_harvest* h, char** out) {
  if (h == nullptr) return NullArg("harvest_to_json.h");
  if (out == nullptr) return NullArg("harvest_to_json.out");
  return Wrap([&] { *out = CopyString(mhclite::HarvestToJson(h->h)); });
}

mhclite_status mhclite_harvest_from_json(const char* json,
                                         mhclite_harvest** out) {
  if (json == nullptr) return NullArg("harvest_from_json.json");
  if (out == nullptr) return NullArg("harvest_from_json.out");
  return Wrap([&] {
    *out = new mhclite_harvest{mhclite::HarvestFromJson(std::string(json))};
  });
}

/* ---- stability diagnostics ---------------------------------------------- */

mhclite_status mhclite_nu_scan(const mhclite_harvest* h, mhclite_report** out) {
  if (h == nullptr) return NullArg("nu_scan.h");
  if (out == nullptr) return NullArg("nu_scan.out");
  return Wrap([&] {
    std::vector<mhclite::Mat> pre;
    for (const mhclite::HarvestRecord& rec : h->h.records)
      if (rec.pre_sk.has_value()) pre.push_back(*rec.pre_sk);
    if (pre.empty())
      throw std::domain_error(
          "nu_scan: harvest holds no pre-projection matrices");
    *out = new mhclite_report{{mhclite::NuScan(pre)}};
  });
}

mhclite_status mhclite_colsum(const mhclite_harvest* h, int include_product,
                              mhclite_report** out) {
  if (h == nullptr) return NullArg("colsum.h");
  if (out == nullptr) return NullArg("colsum.out");
  return Wrap([&] {
    std::vector<mhclite::Mat> maps;
    maps.reserve(h->h.records.size());
    for (const mhclite::HarvestRecord& rec : h->h.records)
      maps.push_back(rec.h_res);
    std::vector<mhclite::StabilityStats> stats;
    stats.push_back(mhclite::ColsumStats(maps));
    if (include_product != 0) {
      std::map<std::size_t, std::vector<mhclite::Mat>> by_token;
      for (const mhclite::HarvestRecord& rec : h->h.records)
        by_token[rec.token].push_back(rec.h_res);
      std::vector<mhclite::Mat> products;
      products.reserve(by_token.size());
      for (const auto& [token, layers] : by_token)
        products.push_back(mhclite::DepthProduct(layers));
      stats.push_back(mhclite::ColsumStats(products, "colsum_product"));
    }
    *out = new mhclite_report{std::move(stats)};
  });
}

void mhclite_report_free(mhclite_report* r) { delete r; }

mhclite_status mhclite_report_to_json(const mhclite_report* r, char** out) {
  if (r == nullptr) return NullArg("report_to_json.r");
  if (out == nullptr) return NullArg("report_to_json.out");
  return Wrap([&] { *out = CopyString(mhclite::ReportToJson(r->stats)); });
}

mhclite_status mhclite_report_to_csv(const mhclite_report* r, char** out) {
  if (r == nullptr) return NullArg("report_to_csv.r");
  if (out == nullptr) return NullArg("report_to_csv.out");
  return Wrap([&] { *out = CopyString(mhclite::ReportToCsv(r->stats)); });
}

/* ---- benchmarking ------------------------------------------------------- */

mhclite_status mhclite_bench_forward(size_t n, size_t channels,
                                     size_t sk_iters, size_t reps, size_t jobs,
                                     uint64_t seed, mhclite_bench_result* out) {
  if (out == nullptr) return NullArg("bench_forward.out");
  return Wrap([&] {
    const mhclite::BenchResult r =
        mhclite::BenchForward(n, channels, sk_iters, reps, jobs, seed);
    out->n = r.n;
    out->channels = r.channels;
    out->sk_iters = r.sk_iters;
    out->reps = r.reps;
    out->jobs = r.jobs;
    out->median_ns_unconstrained = r.median_ns_unconstrained;
    out->median_ns_mhc = r.median_ns_mhc;
    out->median_ns_mhc_lite = r.median_ns_mhc_lite;
  });
}

} /* extern "C" */

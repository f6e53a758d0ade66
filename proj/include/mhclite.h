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

// C API for the mhclite library: doubly stochastic residual-mixing maps
// (Sinkhorn-Knopp projection and exact permutation-basis combination),
// hyper-connection block evaluation, analytic-vs-finite-difference gradient
// checks, toy training, and stability diagnostics.
//
// Conventions:
//   - Every fallible call returns mhclite_status; MHCLITE_OK is 0.
//   - On failure, mhclite_last_error() returns a thread-local message valid
//     until the next library call on the same thread.
//   - Objects returned through `type** out` parameters are owned by the
//     caller and released with the matching *_free function. Frees accept
//     NULL.
//   - Strings returned through `char** out` are released with
//     mhclite_string_free.
//   - Matrices are dense row-major doubles.
//
// All functions are thread-safe on distinct objects; a single object must
// not be mutated concurrently.

#ifndef MHCLITE_MHCLITE_H_
#define MHCLITE_MHCLITE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(MHCLITE_BUILD)
#define MHCLITE_API __declspec(dllexport)
#else
#define MHCLITE_API __declspec(dllimport)
#endif
#else
#define MHCLITE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mhclite_status {
  MHCLITE_OK = 0,
  MHCLITE_ERR_ARGUMENT = 1, /* bad shape, flag, or null pointer */
  MHCLITE_ERR_DOMAIN = 2,   /* numerically invalid input */
  MHCLITE_ERR_CAPACITY = 3, /* size limit exceeded (stream count > 8) */
  MHCLITE_ERR_RUNTIME = 4   /* I/O or internal failure */
} mhclite_status;

typedef enum mhclite_variant {
  MHCLITE_VARIANT_UNCONSTRAINED = 0,
  MHCLITE_VARIANT_MHC = 1,
  MHCLITE_VARIANT_MHC_LITE = 2
} mhclite_variant;

typedef struct mhclite_mat mhclite_mat;
typedef struct mhclite_sk_report mhclite_sk_report;
typedef struct mhclite_params mhclite_params;
typedef struct mhclite_grad_report mhclite_grad_report;
typedef struct mhclite_dataset mhclite_dataset;
typedef struct mhclite_model mhclite_model;
typedef struct mhclite_train_log mhclite_train_log;
typedef struct mhclite_harvest mhclite_harvest;
typedef struct mhclite_report mhclite_report;

MHCLITE_API const char* mhclite_version(void);
MHCLITE_API const char* mhclite_last_error(void);
MHCLITE_API void mhclite_string_free(char* s);

/* ---- matrices ---------------------------------------------------------- */

/* data is row-major with rows*cols entries; NULL zero-fills. */
MHCLITE_API mhclite_status mhclite_mat_create(size_t rows, size_t cols,
                                              const double* data,
                                              mhclite_mat** out);
MHCLITE_API void mhclite_mat_free(mhclite_mat* m);
MHCLITE_API size_t mhclite_mat_rows(const mhclite_mat* m);
MHCLITE_API size_t mhclite_mat_cols(const mhclite_mat* m);
/* Copies all entries row-major; len must be >= rows*cols. */
MHCLITE_API mhclite_status mhclite_mat_read(const mhclite_mat* m, double* out,
                                            size_t len);
MHCLITE_API mhclite_status mhclite_mat_col_sums(const mhclite_mat* m,
                                                double* out, size_t len);
/* l1 distances of row/column sums from 1; requires a square matrix. */
MHCLITE_API mhclite_status mhclite_mat_ds_error(const mhclite_mat* m,
                                                double* row_l1, double* col_l1,
                                                double* total);
/* min/max over positive entries; zeros ignored, any negative entry fails. */
MHCLITE_API mhclite_status mhclite_mat_relative_range(const mhclite_mat* m,
                                                      double* out);

/* ---- Sinkhorn-Knopp ----------------------------------------------------- */

/* The ill-conditioned 3x3 demo matrix [[0.5,a,a],[0.5,a,a],[a,1,1]]. */
MHCLITE_API mhclite_status mhclite_adverse_matrix(double alpha,
                                                  mhclite_mat** out);
/* Alternating column/row normalization for up to max_iters (>= 1)
 * iterations, stopping early once the combined l1 error reaches tol (>= 0;
 * 0 always runs the full budget). */
MHCLITE_API mhclite_status mhclite_sk_normalize(const mhclite_mat* m,
                                                size_t max_iters, double tol,
                                                mhclite_sk_report** out);
MHCLITE_API void mhclite_sk_report_free(mhclite_sk_report* r);
MHCLITE_API mhclite_status mhclite_sk_report_result(const mhclite_sk_report* r,
                                                    mhclite_mat** out);
MHCLITE_API size_t mhclite_sk_report_iterations(const mhclite_sk_report* r);
MHCLITE_API int mhclite_sk_report_converged(const mhclite_sk_report* r);
MHCLITE_API size_t mhclite_sk_report_trace_len(const mhclite_sk_report* r);
/* One (row_l1, col_l1, total) triple per iteration; len >= 3*trace_len. */
MHCLITE_API mhclite_status mhclite_sk_report_trace(const mhclite_sk_report* r,
                                                   double* out, size_t len);

/* ---- permutation basis -------------------------------------------------- */

MHCLITE_API mhclite_status mhclite_factorial(size_t n, size_t* out);
/* Convex combination sum_k w[k] P_k over the n! permutation matrices of
 * size n (lexicographic order); len must equal n!. */
MHCLITE_API mhclite_status mhclite_combine(size_t n, const double* weights,
                                           size_t len, mhclite_mat** out);
/* Greedy Birkhoff decomposition of a doubly stochastic matrix into
 * normalized permutation weights. weights_len must be >= n!; *out_len is set
 * to n!. */
MHCLITE_API mhclite_status mhclite_birkhoff_decompose(const mhclite_mat* m,
                                                      double* weights,
                                                      size_t weights_len,
                                                      size_t* out_len);

/* ---- hyperblock --------------------------------------------------------- */

/* Reduced-to-residual initialization: zero weights, alphas 0.01, pre/post
 * biases -1 except +1 at pick_index, residual logits favoring identity. */
MHCLITE_API mhclite_status mhclite_params_init(mhclite_variant variant,
                                               size_t n, size_t channels,
                                               size_t pick_index,
                                               mhclite_params** out);
MHCLITE_API void mhclite_params_free(mhclite_params* p);
MHCLITE_API mhclite_status mhclite_params_randomize(mhclite_params* p,
                                                    uint64_t seed,
                                                    double scale);
/* Bit-exact f64 round-trip. */
MHCLITE_API mhclite_status mhclite_params_to_json(const mhclite_params* p,
                                                  char** out);
MHCLITE_API mhclite_status mhclite_params_from_json(const char* json,
                                                    mhclite_params** out);

/* Residual branch callback: maps a length-`len` row to a length-`len` row. */
typedef void (*mhclite_branch_fn)(const double* in, double* out, size_t len,
                                  void* ctx);

/* One block step x_next = h_res x + h_post^T f(h_pre x) on an n-x-channels
 * state. NULL f means identity. h_res_out (always) and pre_sk_out (the
 * mhc variant's pre-projection matrix, NULL otherwise) are optional. */
MHCLITE_API mhclite_status mhclite_block_forward(
    const mhclite_params* p, const mhclite_mat* x, size_t sk_iters,
    mhclite_branch_fn f, void* ctx, mhclite_mat** x_next,
    mhclite_mat** h_res_out, mhclite_mat** pre_sk_out);

/* ---- gradient checks ---------------------------------------------------- */

/* Analytic gradients vs central finite differences on a randomized block,
 * input, and quadratic loss; one group per parameter family plus "input". */
MHCLITE_API mhclite_status mhclite_grad_check(mhclite_variant variant,
                                              size_t n, size_t channels,
                                              uint64_t seed, size_t sk_iters,
                                              mhclite_grad_report** out);
MHCLITE_API void mhclite_grad_report_free(mhclite_grad_report* r);
MHCLITE_API size_t
mhclite_grad_report_group_count(const mhclite_grad_report* r);
/* Borrowed pointer, valid while the report lives; NULL when out of range. */
MHCLITE_API const char* mhclite_grad_report_group_name(
    const mhclite_grad_report* r, size_t index);
MHCLITE_API mhclite_status mhclite_grad_report_group_err(
    const mhclite_grad_report* r, size_t index, double* out);
MHCLITE_API mhclite_status
mhclite_grad_report_worst(const mhclite_grad_report* r, double* out);

/* ---- toy training ------------------------------------------------------- */

MHCLITE_API mhclite_status mhclite_make_task(uint64_t seed, size_t d_in,
                                             size_t d_out, size_t samples,
                                             mhclite_dataset** out);
MHCLITE_API void mhclite_dataset_free(mhclite_dataset* d);

MHCLITE_API mhclite_status mhclite_make_model(mhclite_variant variant,
                                              size_t n, size_t channels,
                                              size_t depth, size_t d_in,
                                              size_t d_out, size_t sk_iters,
                                              uint64_t seed,
                                              mhclite_model** out);
MHCLITE_API void mhclite_model_free(mhclite_model* m);

/* Full-batch AdamW training; mutates the model in place. */
MHCLITE_API mhclite_status mhclite_train(mhclite_model* m,
                                         const mhclite_dataset* d,
                                         size_t steps, double lr,
                                         mhclite_train_log** out);
MHCLITE_API void mhclite_train_log_free(mhclite_train_log* l);
MHCLITE_API size_t mhclite_train_log_len(const mhclite_train_log* l);
/* Any output pointer may be NULL to skip that column. */
MHCLITE_API mhclite_status mhclite_train_log_row(const mhclite_train_log* l,
                                                 size_t index, size_t* step,
                                                 double* loss,
                                                 double* grad_norm,
                                                 double* max_ds_error,
                                                 double* ms_per_step);
/* Header step,loss,grad_norm,max_ds_error,ms_per_step; 17-digit floats. */
MHCLITE_API mhclite_status mhclite_train_log_csv(const mhclite_train_log* l,
                                                 char** out);

/* Residual maps (and pre-projection matrices for mhc) of the first `tokens`
 * dataset rows, token-major. */
MHCLITE_API mhclite_status mhclite_harvest_run(const mhclite_model* m,
                                               const mhclite_dataset* d,
                                               size_t tokens,
                                               mhclite_harvest** out);
MHCLITE_API void mhclite_harvest_free(mhclite_harvest* h);
MHCLITE_API mhclite_status mhclite_harvest_to_json(const mhclite_harvest* h,
                                                   char** out);
MHCLITE_API mhclite_status mhclite_harvest_from_json(const char* json,
                                                     mhclite_harvest** out);

/* ---- stability diagnostics ---------------------------------------------- */

/* Boxplot stats of ln(1/nu) over the harvest's pre-projection matrices,
 * where nu is the smallest/largest positive-entry ratio. Fails unless the
 * harvest came from the mhc variant. */
MHCLITE_API mhclite_status mhclite_nu_scan(const mhclite_harvest* h,
                                           mhclite_report** out);
/* Column-sum stats over every harvested residual map; include_product != 0
 * appends a second entry for per-token depth products. */
MHCLITE_API mhclite_status mhclite_colsum(const mhclite_harvest* h,
                                          int include_product,
                                          mhclite_report** out);
MHCLITE_API void mhclite_report_free(mhclite_report* r);
MHCLITE_API mhclite_status mhclite_report_to_json(const mhclite_report* r,
                                                  char** out);
MHCLITE_API mhclite_status mhclite_report_to_csv(const mhclite_report* r,
                                                 char** out);

/* ---- benchmarking ------------------------------------------------------- */

typedef struct mhclite_bench_result {
  size_t n;
  size_t channels;
  size_t sk_iters;
  size_t reps;
  size_t jobs;
  double median_ns_unconstrained;
  double median_ns_mhc;
  double median_ns_mhc_lite;
} mhclite_bench_result;

/* Median per-call forward time of each variant on identical shapes, reps
 * interleaved; jobs in [1,64] splits reps across threads. */
MHCLITE_API mhclite_status mhclite_bench_forward(size_t n, size_t channels,
                                                 size_t sk_iters, size_t reps,
                                                 size_t jobs, uint64_t seed,
                                                 mhclite_bench_result* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MHCLITE_MHCLITE_H_ */

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

// mhclite command-line front end. Data goes to stdout (or --out),
// diagnostics to stderr; every subcommand is deterministic given its flags
// and seed, bench and the wall-clock column aside.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mhclite.h"

namespace {

using nlohmann::json;

constexpr double kGradTol = 1e-4;

[[noreturn]] void Die(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(1);
}

void Check(mhclite_status s, const char* what) {
  if (s != MHCLITE_OK) Die(std::string(what) + ": " + mhclite_last_error());
}

struct MatFree {
  void operator()(mhclite_mat* m) const { mhclite_mat_free(m); }
};
using MatPtr = std::unique_ptr<mhclite_mat, MatFree>;

std::string TakeString(char* s) {
  std::string out(s == nullptr ? "" : s);
  mhclite_string_free(s);
  return out;
}

std::string ReadFileOrDie(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Die("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) Die("cannot open " + out_path + " for writing");
  out << text;
  if (!out) Die("write to " + out_path + " failed");
}

json MatToJson(const mhclite_mat* m) {
  const size_t rows = mhclite_mat_rows(m), cols = mhclite_mat_cols(m);
  std::vector<double> buf(rows * cols);
  Check(mhclite_mat_read(m, buf.data(), buf.size()), "mat_read");
  json out = json::array();
  for (size_t i = 0; i < rows; ++i) {
    json row = json::array();
    for (size_t j = 0; j < cols; ++j) row.push_back(buf[i * cols + j]);
    out.push_back(std::move(row));
  }
  return out;
}

MatPtr MatFromJson(const json& j) {
  if (!j.is_array() || j.empty()) Die("matrix JSON must be arrays-of-arrays");
  const size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty())
    Die("matrix JSON must be arrays-of-arrays");
  const size_t cols = j[0].size();
  std::vector<double> buf;
  buf.reserve(rows * cols);
  for (const json& row : j) {
    if (!row.is_array() || row.size() != cols) Die("ragged matrix JSON");
    for (const json& v : row) {
      if (!v.is_number()) Die("matrix entries must be numbers");
      buf.push_back(v.get<double>());
    }
  }
  mhclite_mat* m = nullptr;
  Check(mhclite_mat_create(rows, cols, buf.data(), &m), "mat_create");
  return MatPtr(m);
}

mhclite_variant VariantFromFlag(const std::string& name) {
  if (name == "unconstrained") return MHCLITE_VARIANT_UNCONSTRAINED;
  if (name == "mhc") return MHCLITE_VARIANT_MHC;
  if (name == "mhc-lite") return MHCLITE_VARIANT_MHC_LITE;
  Die("unknown variant " + name);
}

const char* VariantFlagName(mhclite_variant v) {
  switch (v) {
    case MHCLITE_VARIANT_UNCONSTRAINED:
      return "unconstrained";
    case MHCLITE_VARIANT_MHC:
      return "mhc";
    default:
      return "mhc-lite";
  }
}

int RunSkDemo(double alpha, std::size_t iters, double tol,
              const std::string& out_path) {
  mhclite_mat* raw = nullptr;
  Check(mhclite_adverse_matrix(alpha, &raw), "adverse_matrix");
  MatPtr m(raw);
  mhclite_sk_report* rep = nullptr;
  Check(mhclite_sk_normalize(m.get(), iters, tol, &rep), "sk_normalize");
  mhclite_mat* res_raw = nullptr;
  Check(mhclite_sk_report_result(rep, &res_raw), "sk_report_result");
  MatPtr result(res_raw);

  std::vector<double> col_sums(mhclite_mat_cols(result.get()));
  Check(mhclite_mat_col_sums(result.get(), col_sums.data(), col_sums.size()),
        "mat_col_sums");
  const size_t trace_len = mhclite_sk_report_trace_len(rep);
  std::vector<double> trace(3 * trace_len);
  Check(mhclite_sk_report_trace(rep, trace.data(), trace.size()),
        "sk_report_trace");

  json j;
  j["alpha"] = alpha;
  j["max_iters"] = iters;
  j["tol"] = tol;
  j["iterations_run"] = mhclite_sk_report_iterations(rep);
  j["converged"] = mhclite_sk_report_converged(rep) != 0;
  j["input"] = MatToJson(m.get());
  j["result"] = MatToJson(result.get());
  j["col_sums"] = col_sums;
  json tr = json::array();
  for (size_t i = 0; i < trace_len; ++i) {
    tr.push_back({{"row_l1", trace[3 * i]},
                  {"col_l1", trace[3 * i + 1]},
                  {"total", trace[3 * i + 2]}});
  }
  j["l1_trace"] = std::move(tr);
  mhclite_sk_report_free(rep);
  Emit(j.dump(2), out_path);
  return 0;
}

int RunDecompose(const std::string& in_path, const std::string& out_path) {
  const std::string text =
      in_path.empty()
          ? std::string(std::istreambuf_iterator<char>(std::cin), {})
          : ReadFileOrDie(in_path);
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) Die("input is not valid JSON");
  MatPtr m = MatFromJson(parsed);
  const size_t n = mhclite_mat_rows(m.get());
  size_t fact = 0;
  Check(mhclite_factorial(n, &fact), "factorial");
  std::vector<double> weights(fact, 0.0);
  size_t out_len = 0;
  Check(mhclite_birkhoff_decompose(m.get(), weights.data(), weights.size(),
                                   &out_len),
        "birkhoff_decompose");
  json j;
  j["n"] = n;
  j["weights"] = std::vector<double>(weights.begin(), weights.begin() + out_len);
  Emit(j.dump(2), out_path);
  return 0;
}

int RunGradCheck(const std::string& variant_flag, std::uint64_t seed,
                 std::size_t count, std::size_t n, std::size_t channels,
                 std::size_t iters, std::size_t jobs, bool as_json,
                 const std::string& out_path) {
  std::vector<mhclite_variant> variants;
  if (variant_flag == "all") {
    variants = {MHCLITE_VARIANT_UNCONSTRAINED, MHCLITE_VARIANT_MHC,
                MHCLITE_VARIANT_MHC_LITE};
  } else {
    variants = {VariantFromFlag(variant_flag)};
  }
  struct Task {
    mhclite_variant variant;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (mhclite_variant v : variants)
    for (std::size_t k = 0; k < count; ++k)
      tasks.push_back({v, seed + static_cast<std::uint64_t>(k)});

  std::vector<mhclite_grad_report*> reports(tasks.size(), nullptr);
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      mhclite_grad_report* r = nullptr;
      Check(mhclite_grad_check(tasks[i].variant, n, channels, tasks[i].seed,
                               iters, &r),
            "grad_check");
      reports[i] = r;
    }
  };
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  bool all_pass = true;
  std::ostringstream text;
  json jout = json::array();
  if (!as_json) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s %-6s %-10s %-13s %s\n", "variant",
                  "seed", "group", "max_rel_err", "status");
    text << line;
  }
  for (size_t i = 0; i < tasks.size(); ++i) {
    mhclite_grad_report* r = reports[i];
    json jgroups = json::array();
    const size_t groups = mhclite_grad_report_group_count(r);
    for (size_t g = 0; g < groups; ++g) {
      const char* name = mhclite_grad_report_group_name(r, g);
      double err = 0.0;
      Check(mhclite_grad_report_group_err(r, g, &err), "group_err");
      const bool pass = err <= kGradTol;
      all_pass = all_pass && pass;
      if (as_json) {
        jgroups.push_back(
            {{"name", name}, {"max_rel_err", err}, {"pass", pass}});
      } else {
        char line[128];
        std::snprintf(line, sizeof(line), "%-14s %-6llu %-10s %-13.3e %s\n",
                      VariantFlagName(tasks[i].variant),
                      static_cast<unsigned long long>(tasks[i].seed), name,
                      err, pass ? "pass" : "FAIL");
        text << line;
      }
    }
    if (as_json) {
      double worst = 0.0;
      Check(mhclite_grad_report_worst(r, &worst), "worst");
      jout.push_back({{"variant", VariantFlagName(tasks[i].variant)},
                      {"seed", tasks[i].seed},
                      {"n", n},
                      {"channels", channels},
                      {"groups", std::move(jgroups)},
                      {"worst", worst},
                      {"pass", worst <= kGradTol}});
    }
    mhclite_grad_report_free(r);
  }
  Emit(as_json ? jout.dump(2) : text.str(), out_path);
  if (!all_pass) std::cerr << "grad-check: threshold exceeded\n";
  return all_pass ? 0 : 1;
}

int RunTrain(const std::string& variant_flag, std::size_t n,
             std::size_t channels, std::size_t depth, std::size_t steps,
             double lr, std::uint64_t seed, std::size_t iters,
             std::size_t samples, std::size_t d_in, std::size_t d_out,
             const std::string& out_path, const std::string& harvest_path,
             std::size_t tokens) {
  mhclite_dataset* data = nullptr;
  Check(mhclite_make_task(seed, d_in, d_out, samples, &data), "make_task");
  mhclite_model* model = nullptr;
  Check(mhclite_make_model(VariantFromFlag(variant_flag), n, channels, depth,
                           d_in, d_out, iters, seed + 1, &model),
        "make_model");
  mhclite_train_log* log = nullptr;
  const mhclite_status st = mhclite_train(model, data, steps, lr, &log);
  if (st != MHCLITE_OK) {
    mhclite_model_free(model);
    mhclite_dataset_free(data);
    Die(std::string("train: ") + mhclite_last_error());
  }

  char* csv = nullptr;
  Check(mhclite_train_log_csv(log, &csv), "train_log_csv");
  Emit(TakeString(csv), out_path);

  const size_t len = mhclite_train_log_len(log);
  double first_loss = 0.0, last_loss = 0.0, max_ds = 0.0;
  if (len > 0) {
    Check(mhclite_train_log_row(log, 0, nullptr, &first_loss, nullptr, nullptr,
                                nullptr),
          "train_log_row");
    Check(mhclite_train_log_row(log, len - 1, nullptr, &last_loss, nullptr,
                                nullptr, nullptr),
          "train_log_row");
    for (size_t i = 0; i < len; ++i) {
      double ds = 0.0;
      Check(mhclite_train_log_row(log, i, nullptr, nullptr, nullptr, &ds,
                                  nullptr),
            "train_log_row");
      if (ds > max_ds) max_ds = ds;
    }
  }
  std::cerr << "train: steps=" << len << " first_loss=" << first_loss
            << " last_loss=" << last_loss << " max_ds_error=" << max_ds
            << "\n";

  if (!harvest_path.empty()) {
    mhclite_harvest* h = nullptr;
    Check(mhclite_harvest_run(model, data, tokens, &h), "harvest_run");
    char* hjson = nullptr;
    Check(mhclite_harvest_to_json(h, &hjson), "harvest_to_json");
    Emit(TakeString(hjson), harvest_path);
    mhclite_harvest_free(h);
    std::cerr << "train: harvest written to " << harvest_path << "\n";
  }

  mhclite_train_log_free(log);
  mhclite_model_free(model);
  mhclite_dataset_free(data);
  return 0;
}

int RunScan(bool nu, const std::string& harvest_path, bool product,
            const std::string& format, const std::string& out_path) {
  const std::string text = ReadFileOrDie(harvest_path);
  mhclite_harvest* h = nullptr;
  Check(mhclite_harvest_from_json(text.c_str(), &h), "harvest_from_json");
  mhclite_report* rep = nullptr;
  if (nu) {
    Check(mhclite_nu_scan(h, &rep), "nu_scan");
  } else {
    Check(mhclite_colsum(h, product ? 1 : 0, &rep), "colsum");
  }
  char* body = nullptr;
  if (format == "csv") {
    Check(mhclite_report_to_csv(rep, &body), "report_to_csv");
  } else {
    Check(mhclite_report_to_json(rep, &body), "report_to_json");
  }
  Emit(TakeString(body), out_path);
  mhclite_report_free(rep);
  mhclite_harvest_free(h);
  return 0;
}

int RunBench(std::size_t n, std::size_t channels, std::size_t iters,
             std::size_t reps, std::size_t jobs, std::uint64_t seed,
             const std::string& out_path) {
  mhclite_bench_result r;
  Check(mhclite_bench_forward(n, channels, iters, reps, jobs, seed, &r),
        "bench_forward");
  json j;
  j["n"] = r.n;
  j["channels"] = r.channels;
  j["sk_iters"] = r.sk_iters;
  j["reps"] = r.reps;
  j["jobs"] = r.jobs;
  j["median_ns"] = {{"unconstrained", r.median_ns_unconstrained},
                    {"mhc", r.median_ns_mhc},
                    {"mhc_lite", r.median_ns_mhc_lite}};
  j["mhc_over_mhc_lite"] = r.median_ns_mhc / r.median_ns_mhc_lite;
  Emit(j.dump(2), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doubly stochastic residual-mixing toolkit"};
  app.require_subcommand(1);

  const std::vector<std::string> kVariantNames = {"all", "unconstrained",
                                                  "mhc", "mhc-lite"};

  // sk-demo
  double sk_alpha = 1e-13;
  std::size_t sk_iters = 20;
  double sk_tol = 1e-6;
  std::string sk_out;
  CLI::App* sk = app.add_subcommand(
      "sk-demo", "alternating normalization on the ill-conditioned example");
  sk->add_option("--alpha", sk_alpha, "small-entry value of the demo matrix");
  sk->add_option("--iters", sk_iters, "iteration budget")
      ->check(CLI::PositiveNumber);
  sk->add_option("--tol", sk_tol, "early-stop l1 tolerance (0 = full budget)");
  sk->add_option("--out", sk_out, "write JSON here instead of stdout");

  // decompose
  std::string dc_in, dc_out;
  CLI::App* dc = app.add_subcommand(
      "decompose", "permutation-weight decomposition of a JSON matrix");
  dc->add_option("--in", dc_in, "matrix JSON file (default: stdin)");
  dc->add_option("--out", dc_out, "write JSON here instead of stdout");

  // grad-check
  std::string gc_variant = "all";
  std::uint64_t gc_seed = 0;
  std::size_t gc_count = 1, gc_n = 4, gc_channels = 8, gc_iters = 20,
              gc_jobs = 1;
  bool gc_json = false;
  std::string gc_out;
  CLI::App* gc = app.add_subcommand(
      "grad-check", "analytic gradients vs central finite differences");
  gc->add_option("--variant", gc_variant, "variant or all")
      ->check(CLI::IsMember(kVariantNames));
  gc->add_option("--seed", gc_seed, "first seed");
  gc->add_option("--count", gc_count, "seeds per variant")
      ->check(CLI::PositiveNumber);
  gc->add_option("--n", gc_n, "stream count")->check(CLI::PositiveNumber);
  gc->add_option("--channels", gc_channels, "channels per stream")
      ->check(CLI::PositiveNumber);
  gc->add_option("--iters", gc_iters, "projection iterations")
      ->check(CLI::PositiveNumber);
  gc->add_option("--jobs", gc_jobs, "worker threads")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  gc->add_flag("--json", gc_json, "emit JSON instead of the text table");
  gc->add_option("--out", gc_out, "write here instead of stdout");

  // train
  std::string tr_variant = "mhc-lite";
  std::size_t tr_n = 4, tr_channels = 16, tr_depth = 6, tr_steps = 500,
              tr_iters = 20, tr_samples = 64, tr_din = 8, tr_dout = 4,
              tr_tokens = 8;
  double tr_lr = 1e-3;
  std::uint64_t tr_seed = 0;
  std::string tr_out = "train_log.csv", tr_harvest;
  CLI::App* tr =
      app.add_subcommand("train", "toy multi-stream training run");
  tr->add_option("--variant", tr_variant, "residual-mixing variant")
      ->check(CLI::IsMember({"unconstrained", "mhc", "mhc-lite"}));
  tr->add_option("--n", tr_n, "stream count")->check(CLI::PositiveNumber);
  tr->add_option("--channels", tr_channels, "channels per stream")
      ->check(CLI::PositiveNumber);
  tr->add_option("--depth", tr_depth, "block count")
      ->check(CLI::PositiveNumber);
  tr->add_option("--steps", tr_steps, "optimizer steps")
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr", tr_lr, "peak learning rate");
  tr->add_option("--seed", tr_seed, "task/model seed");
  tr->add_option("--iters", tr_iters, "projection iterations")
      ->check(CLI::PositiveNumber);
  tr->add_option("--samples", tr_samples, "dataset rows")
      ->check(CLI::PositiveNumber);
  tr->add_option("--d-in", tr_din, "input width")->check(CLI::PositiveNumber);
  tr->add_option("--d-out", tr_dout, "target width")
      ->check(CLI::PositiveNumber);
  tr->add_option("--out", tr_out, "training-log CSV path");
  tr->add_option("--harvest", tr_harvest,
                 "also write a residual-map harvest JSON here");
  tr->add_option("--tokens", tr_tokens, "tokens to harvest")
      ->check(CLI::PositiveNumber);

  // nu-scan / colsum
  std::string nu_harvest, nu_format = "json", nu_out;
  CLI::App* nu = app.add_subcommand(
      "nu-scan", "conditioning statistics of harvested pre-projection maps");
  nu->add_option("--harvest", nu_harvest, "harvest JSON file")->required();
  nu->add_option("--format", nu_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  nu->add_option("--out", nu_out, "write here instead of stdout");

  std::string cs_harvest, cs_format = "json", cs_out;
  bool cs_product = false;
  CLI::App* cs = app.add_subcommand(
      "colsum", "column-sum statistics of harvested residual maps");
  cs->add_option("--harvest", cs_harvest, "harvest JSON file")->required();
  cs->add_flag("--product", cs_product, "also analyze per-token depth products");
  cs->add_option("--format", cs_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cs->add_option("--out", cs_out, "write here instead of stdout");

  // bench
  std::size_t be_n = 4, be_channels = 768, be_iters = 20, be_reps = 1000,
              be_jobs = 1;
  std::uint64_t be_seed = 0;
  std::string be_out;
  CLI::App* be = app.add_subcommand(
      "bench", "median forward-pass time per variant (ns/block)");
  be->add_option("--n", be_n, "stream count")->check(CLI::PositiveNumber);
  be->add_option("--channels", be_channels, "channels per stream")
      ->check(CLI::PositiveNumber);
  be->add_option("--iters", be_iters, "projection iterations")
      ->check(CLI::PositiveNumber);
  be->add_option("--reps", be_reps, "timed repetitions")
      ->check(CLI::PositiveNumber);
  be->add_option("--jobs", be_jobs, "worker threads")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  be->add_option("--seed", be_seed, "parameter seed");
  be->add_option("--out", be_out, "write JSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  if (sk->parsed()) return RunSkDemo(sk_alpha, sk_iters, sk_tol, sk_out);
  if (dc->parsed()) return RunDecompose(dc_in, dc_out);
  if (gc->parsed())
    return RunGradCheck(gc_variant, gc_seed, gc_count, gc_n, gc_channels,
                        gc_iters, gc_jobs, gc_json, gc_out);
  if (tr->parsed())
    return RunTrain(tr_variant, tr_n, tr_channels, tr_depth, tr_steps, tr_lr,
                    tr_seed, tr_iters, tr_samples, tr_din, tr_dout, tr_out,
                    tr_harvest, tr_tokens);
  if (nu->parsed()) return RunScan(true, nu_harvest, false, nu_format, nu_out);
  if (cs->parsed())
    return RunScan(false, cs_harvest, cs_product, cs_format, cs_out);
  if (be->parsed())
    return RunBench(be_n, be_channels, be_iters, be_reps, be_jobs, be_seed,
                    be_out);
  return 1;
}

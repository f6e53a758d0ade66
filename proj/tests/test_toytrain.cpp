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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest/doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mat.hpp"
#include "toytrain.hpp"

namespace mhclite {
namespace {

TEST_CASE("task generation is deterministic and shaped") {
  const Dataset a = MakeTask(3, 8, 4, 16);
  const Dataset b = MakeTask(3, 8, 4, 16);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  CHECK(a.inputs.rows() == 16);
  CHECK(a.inputs.cols() == 8);
  CHECK(a.targets.rows() == 16);
  CHECK(a.targets.cols() == 4);
  const Dataset c = MakeTask(4, 8, 4, 16);
  CHECK(!(a.targets == c.targets));
}

TEST_CASE("task arguments are validated") {
  CHECK_THROWS_AS(MakeTask(0, 8, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(MakeTask(0, 0, 4, 16), std::invalid_argument);
}

TEST_CASE("teacher targets have usable variance") {
  const Dataset d = MakeTask(0, 8, 4, 10000);
  double mean = 0.0;
  for (double v : d.targets.data()) mean += v;
  mean /= static_cast<double>(d.targets.size());
  double var = 0.0;
  for (double v : d.targets.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d.targets.size());
  CHECK(var >= 0.1);
  CHECK(var <= 10.0);
}

TEST_CASE("model construction and validation") {
  const ToyModel m = MakeModel(Variant::kMhcLite, 4, 16, 6, 8, 4, 1);
  CHECK(m.blocks.size() == 6);
  CHECK(m.branches.size() == 6);
  CHECK(m.embed.rows() == 8);
  CHECK(m.embed.cols() == 64);
  CHECK(m.readout.rows() == 16);
  CHECK(m.readout.cols() == 4);
  // Blocks start at the reduced initialization.
  for (const BlockParams& p : m.blocks) {
    for (double e : p.w_res.data()) CHECK(e == 0.0);
    CHECK(p.alpha_res == 0.01);
  }
  CHECK_THROWS_AS(MakeModel(Variant::kMhcLite, 4, 16, 0, 8, 4, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(MakeModel(Variant::kMhc, 4, 16, 2, 8, 4, 1, 0),
                  std::invalid_argument);
}

TEST_CASE("training is deterministic step for step") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  ToyModel m1 = MakeModel(Variant::kMhcLite, 4, 8, 2, 8, 4, 1);
  ToyModel m2 = MakeModel(Variant::kMhcLite, 4, 8, 2, 8, 4, 1);
  const std::vector<TrainRecord> a = Train(m1, data, 20, 1e-3);
  const std::vector<TrainRecord> b = Train(m2, data, 20, 1e-3);
  REQUIRE(a.size() == 20);
  REQUIRE(b.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].step == i);
    CHECK(a[i].loss == b[i].loss);
    CHECK(a[i].grad_norm == b[i].grad_norm);
    CHECK(a[i].max_ds_error == b[i].max_ds_error);
  }
  CHECK(m1.embed == m2.embed);
  CHECK(m1.blocks[0].w_res == m2.blocks[0].w_res);
}

TEST_CASE("zero learning rate freezes the loss") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  ToyModel m = MakeModel(Variant::kMhcLite, 4, 8, 2, 8, 4, 1);
  const std::vector<TrainRecord> log = Train(m, data, 10, 0.0);
  for (const TrainRecord& r : log)
    CHECK(std::abs(r.loss - log[0].loss) <= 1e-12);
}

TEST_CASE("short runs already descend with bounded updates") {
  const Dataset data = MakeTask(0, 8, 4, 64);
  for (Variant v :
       {Variant::kUnconstrained, Variant::kMhc, Variant::kMhcLite}) {
    ToyModel m = MakeModel(v, 4, 8, 2, 8, 4, 1);
    const std::vector<TrainRecord> log = Train(m, data, 120, 1e-3);
    CHECK(log.back().loss < log.front().loss);
    for (const TrainRecord& r : log) {
      CHECK(r.grad_norm <= 1.0 + 1e-9);
      CHECK(r.ms_per_step >= 0.0);
    }
  }
}

TEST_CASE("lite keeps the residual maps on the polytope while training") {
  const Dataset data = MakeTask(0, 8, 4, 32);
  ToyModel m = MakeModel(Variant::kMhcLite, 4, 8, 3, 8, 4, 1);
  const std::vector<TrainRecord> log = Train(m, data, 60,  1e-3);
  for (const TrainRecord& r : log) CHECK(r.max_ds_error <= 1e-12);
}

TEST_CASE("training aborts on a non-finite loss naming the step") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  ToyModel m = MakeModel(Variant::kMhcLite, 4, 8, 2, 8, 4, 1);
  CHECK_THROWS_WITH_AS(Train(m, data, 50, 1e100),
                       doctest::Contains("step"), std::runtime_error);
}

TEST_CASE("train argument validation") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  ToyModel m = MakeModel(Variant::kMhcLite, 4, 8, 2, 8, 4, 1);
  CHECK_THROWS_AS(Train(m, data, 0, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(Train(m, data, 5, -1.0), std::invalid_argument);
  const Dataset wrong = MakeTask(0, 5, 4, 16);
  CHECK_THROWS_AS(Train(m, wrong, 5, 1e-3), std::invalid_argument);
}

TEST_CASE("csv log holds full-precision values") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  ToyModel m = MakeModel(Variant::kMhc, 4, 8, 2, 8, 4, 1);
  const std::vector<TrainRecord> log = Train(m, data, 5, 1e-3);
  const std::string csv = TrainLogCsv(log);

  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "step,loss,grad_norm,max_ds_error,ms_per_step");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    CHECK(std::stoull(cell) == rows);
    std::getline(row, cell, ',');
    // Round-trip exactness: the printed loss parses back bit-identical.
    CHECK(std::stod(cell) == log[rows].loss);
    std::getline(row, cell, ',');
    CHECK(std::stod(cell) == log[rows].grad_norm);
    std::getline(row, cell, ',');
    CHECK(std::stod(cell) == log[rows].max_ds_error);
    ++rows;
  }
  CHECK(rows == log.size());

  const std::string path =
      (std::filesystem::temp_directory_path() / "mhclite_trainlog_test.csv")
          .string();
  WriteTrainLogCsv(log, path);
  std::ifstream f(path);
  std::stringstream buf;
  buf << f.rdbuf();
  CHECK(buf.str() == csv);
  std::remove(path.c_str());
}

TEST_CASE("harvest layout and determinism at initialization") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  const ToyModel m = MakeModel(Variant::kMhcLite, 4, 8, 3, 8, 4, 1);
  const Harvest h = HarvestHres(m, data, 5);
  CHECK(h.variant == Variant::kMhcLite);
  CHECK(h.depth == 3);
  CHECK(h.tokens == 5);
  REQUIRE(h.records.size() == 15);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t l = 0; l < 3; ++l) {
      const HarvestRecord& r = h.records[t * 3 + l];
      CHECK(r.token == t);
      CHECK(r.layer == l);
      CHECK(!r.pre_sk.has_value());
      CHECK(DsError(r.h_res).total <= 1e-13);
      // Zero W: every token sees the same maps.
      CHECK(r.h_res == h.records[l].h_res);
    }
  }
}

TEST_CASE("mhc harvest retains the pre-projection matrices") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  const ToyModel m = MakeModel(Variant::kMhc, 4, 8, 2, 8, 4, 1);
  const Harvest h = HarvestHres(m, data, 3);
  REQUIRE(h.records.size() == 6);
  for (const HarvestRecord& r : h.records) {
    REQUIRE(r.pre_sk.has_value());
    for (double e : r.pre_sk->data()) CHECK(e > 0.0);
    CHECK(DsError(r.h_res).row_l1 <= 1e-12);
  }
}

TEST_CASE("harvest bounds are validated") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  const ToyModel m = MakeModel(Variant::kMhcLite, 4, 8, 2, 8, 4, 1);
  CHECK_THROWS_AS(HarvestHres(m, data, 0), std::invalid_argument);
  CHECK_THROWS_AS(HarvestHres(m, data, 17), std::invalid_argument);
}

TEST_CASE("harvest json round-trips bit-exact") {
  const Dataset data = MakeTask(0, 8, 4, 16);
  for (Variant v : {Variant::kMhc, Variant::kMhcLite}) {
    const ToyModel m = MakeModel(v, 4, 8, 2, 8, 4, 1);
    const Harvest h = HarvestHres(m, data, 4);
    const Harvest back = HarvestFromJson(HarvestToJson(h));
    CHECK(back.variant == h.variant);
    CHECK(back.n == h.n);
    CHECK(back.channels == h.channels);
    CHECK(back.depth == h.depth);
    CHECK(back.tokens == h.tokens);
    CHECK(back.sk_iters == h.sk_iters);
    REQUIRE(back.records.size() == h.records.size());
    for (std::size_t i = 0; i < h.records.size(); ++i) {
      CHECK(back.records[i].layer == h.records[i].layer);
      CHECK(back.records[i].token == h.records[i].token);
      CHECK(back.records[i].h_res == h.records[i].h_res);
      CHECK(back.records[i].pre_sk.has_value() ==
            h.records[i].pre_sk.has_value());
      if (h.records[i].pre_sk.has_value())
        CHECK(*back.records[i].pre_sk == *h.records[i].pre_sk);
    }
  }
  CHECK_THROWS_AS(HarvestFromJson("{]"), std::invalid_argument);
  CHECK_THROWS_AS(HarvestFromJson("{}"), std::invalid_argument);
}

}  // namespace
}  // namespace mhclite

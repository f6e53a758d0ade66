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

#include "analyze.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ioutil.hpp"

namespace mhclite {

namespace {

using nlohmann::json;

// Linear interpolation at h = (n-1)p over the sorted sample.
double Quantile(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

StabilityStats Summarize(std::string label, std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("Summarize: empty population for '" + label + "'");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Summarize: non-finite value in '" + label + "'");
    }
  }
  std::sort(values.begin(), values.end());
  StabilityStats s;
  s.label = std::move(label);
  s.n = values.size();
  s.min = values.front();
  s.max = values.back();
  s.q1 = Quantile(values, 0.25);
  s.median = Quantile(values, 0.5);
  s.q3 = Quantile(values, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr;
  const double hi = s.q3 + 1.5 * iqr;
  for (double v : values) {
    if (v < lo || v > hi) s.outliers.push_back(v);
  }
  return s;
}

StabilityStats NuScan(std::span<const Mat> mats, std::string label) {
  if (mats.empty()) throw std::invalid_argument("NuScan: no matrices");
  std::vector<double> vals;
  vals.reserve(mats.size());
  std::size_t above = 0;
  for (const Mat& m : mats) {
    for (double x : m.data()) {
      if (!(x > 0.0)) {
        throw std::domain_error(
            "NuScan: matrices must be strictly positive, found " +
            std::to_string(x));
      }
    }
    const double v = std::log(1.0 / RelativeRange(m));
    if (v > kLnNuThreshold) ++above;
    vals.push_back(v);
  }
  StabilityStats s = Summarize(std::move(label), std::move(vals));
  s.frac_above_ln1e13 =
      static_cast<double>(above) / static_cast<double>(mats.size());
  return s;
}

StabilityStats ColsumStats(std::span<const Mat> mats, std::string label) {
  if (mats.empty()) throw std::invalid_argument("ColsumStats: no matrices");
  const std::size_t n = mats.front().rows();
  std::vector<double> vals;
  vals.reserve(mats.size() * n);
  for (const Mat& m : mats) {
    if (m.rows() != n || m.cols() != n) {
      throw std::invalid_argument(
          "ColsumStats: matrices must be square and uniformly sized");
    }
    for (double c : ColSums(m)) vals.push_back(c);
  }
  return Summarize(std::move(label), std::move(vals));
}

Mat DepthProduct(std::span<const Mat> per_layer, std::size_t size_if_empty) {
  if (per_layer.empty()) {
    if (size_if_empty == 0) {
      throw std::invalid_argument(
          "DepthProduct: empty sequence with no declared size");
    }
    return Mat::Identity(size_if_empty);
  }
  const std::size_t n = per_layer.front().rows();
  Mat acc = Mat::Identity(n);
  for (const Mat& h : per_layer) {
    if (h.rows() != n || h.cols() != n) {
      throw std::invalid_argument(
          "DepthProduct: matrices must be square and uniformly sized");
    }
    acc = MatMul(h, acc);  // layer l+1 multiplies on the left
  }
  return acc;
}

std::string ReportToJson(std::span<const StabilityStats> stats) {
  json arr = json::array();
  for (const StabilityStats& s : stats) {
    json j;
    j["label"] = s.label;
    j["n"] = s.n;
    j["min"] = s.min;
    j["q1"] = s.q1;
    j["median"] = s.median;
    j["q3"] = s.q3;
    j["max"] = s.max;
    j["outliers"] = s.outliers;
    if (s.frac_above_ln1e13) j["frac_above_ln1e13"] = *s.frac_above_ln1e13;
    arr.push_back(std::move(j));
  }
  return arr.dump(1);
}

std::vector<StabilityStats> ReportFromJson(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report: parse failure: ") + e.what());
  }
  if (!arr.is_array()) throw std::invalid_argument("report: expected a JSON array");
  std::vector<StabilityStats> out;
  try {
    for (const json& j : arr) {
      StabilityStats s;
      s.label = j.at("label").get<std::string>();
      s.n = j.at("n").get<std::size_t>();
      s.min = j.at("min").get<double>();
      s.q1 = j.at("q1").get<double>();
      s.median = j.at("median").get<double>();
      s.q3 = j.at("q3").get<double>();
      s.max = j.at("max").get<double>();
      s.outliers = j.at("outliers").get<std::vector<double>>();
      if (j.contains("frac_above_ln1e13")) {
        s.frac_above_ln1e13 = j.at("frac_above_ln1e13").get<double>();
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report: missing or mistyped field: ") +
                                e.what());
  }
  return out;
}

std::string ReportToCsv(std::span<const StabilityStats> stats) {
  std::string out = "label,n,min,q1,median,q3,max,frac_above_ln1e13,outliers\n";
  for (const StabilityStats& s : stats) {
    out += s.label;
    out += ',' + std::to_string(s.n);
    for (double v : {s.min, s.q1, s.median, s.q3, s.max}) {
      out += ',';
      out += FmtG17(v);
    }
    out += ',';
    if (s.frac_above_ln1e13) out += FmtG17(*s.frac_above_ln1e13);
    out += ',';
    for (std::size_t i = 0; i < s.outliers.size(); ++i) {
      if (i) out += ';';
      out += FmtG17(s.outliers[i]);
    }
    out += '\n';
  }
  return out;
}

void EmitReport(std::span<const StabilityStats> stats, const std::string& path,
                bool csv) {
  WriteTextFile(path, csv ? ReportToCsv(stats) : ReportToJson(stats));
}

}  // namespace mhclite

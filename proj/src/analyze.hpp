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

#ifndef MHCLITE_ANALYZE_H_
#define MHCLITE_ANALYZE_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mat.hpp"

namespace mhclite {

// Five-number boxplot summary of a named scalar population, with outliers
// by the 1.5*IQR rule. frac_above_ln1e13 is filled only by NuScan.
struct StabilityStats {
  std::string label;
  std::size_t n = 0;  // population size
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  std::vector<double> outliers;
  std::optional<double> frac_above_ln1e13;
};

// ln(10^13), the conditioning threshold used in the nu diagnostics.
inline constexpr double kLnNuThreshold = 29.933606208922594;

// Boxplot summary with linearly interpolated quartiles. values must be
// nonempty and finite.
StabilityStats Summarize(std::string label, std::vector<double> values);

// Population of ln(1/nu) over strictly positive matrices, plus the fraction
// above ln(10^13). Zero or negative entries raise std::domain_error.
StabilityStats NuScan(std::span<const Mat> mats,
                      std::string label = "ln_inv_nu");

// Population of every column sum of every matrix; all matrices must be
// square and of one size.
StabilityStats ColsumStats(std::span<const Mat> mats,
                           std::string label = "colsum");

// H_L * H_{L-1} * ... * H_1 (later layers multiply on the left). An empty
// sequence yields the identity of the declared size, or throws when
// size_if_empty is 0.
Mat DepthProduct(std::span<const Mat> per_layer, std::size_t size_if_empty = 0);

// JSON: array of {label, n, min, q1, median, q3, max, outliers[, frac_above_ln1e13]}.
std::string ReportToJson(std::span<const StabilityStats> stats);
std::vector<StabilityStats> ReportFromJson(const std::string& text);

// CSV: label,n,min,q1,median,q3,max,frac_above_ln1e13,outliers with the
// outlier list ';'-joined and frac empty when absent.
std::string ReportToCsv(std::span<const StabilityStats> stats);

// Writes JSON (or CSV) to path; I/O failures surface the path.
void EmitReport(std::span<const StabilityStats> stats, const std::string& path,
                bool csv = false);

}  // namespace mhclite

#endif  // MHCLITE_ANALYZE_H_

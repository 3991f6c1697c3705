// Copyright 2026 The evomt Authors.
//
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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evomt/evolution.hpp"

namespace evomt {

struct HistogramBin {
  std::string key;  // axis name or action family
  std::string value;
  std::size_t count = 0;
};

struct DepthMean {
  int depth = 0;
  double mean_mu = 0.0;
  std::size_t count = 0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

// Distributions are taken over task models; the root model is excluded.
std::vector<HistogramBin> hparam_histogram(const SystemState& system);
std::vector<HistogramBin> mu_histogram(const SystemState& system);
std::vector<DepthMean> clone_mu_by_depth(const SystemState& system);
/// Least-squares line through (depth, mean) points; one point gives slope 0.
LineFit fit_line(const std::vector<DepthMean>& points);

/// Writes timeline.csv, task_rows.csv, hparam_histogram.csv, mu_histogram.csv,
/// clone_mu_by_depth.csv, clone_mu_fit.csv, lineage.csv and system.dot.
std::vector<std::filesystem::path> emit_reports(const RunState& run, const std::filesystem::path& out_dir);

}  // namespace evomt

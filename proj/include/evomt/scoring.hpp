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

namespace evomt {

class SystemState;

/// Parameters of the cost-penalized score: q * s^(accounted/P) * s^(flops/F).
struct ScoreParams {
  double s = 0.99;
  double P = 1.0;
  double F = 1.0;
  bool size_factor_enabled = true;
  bool compute_factor_enabled = true;

  // Throws Errc::kInvalidValue unless s in (0, 1] and P, F finite positive.
  void validate() const;

  friend bool operator==(const ScoreParams&, const ScoreParams&) = default;
};

double score(double quality, double accounted_params, double flops, const ScoreParams& sp);

/// P and F become multiplier times the mean accounted parameters and mean
/// inference flops over every model in the system; s and flags are kept.
ScoreParams calibrate(const SystemState& system, double multiplier);

}  // namespace evomt

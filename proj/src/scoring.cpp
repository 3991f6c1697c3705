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

#include "evomt/scoring.hpp"

#include <cmath>

#include "evomt/error.hpp"
#include "evomt/system_graph.hpp"

namespace evomt {

void ScoreParams::validate() const {
  if (!(s > 0.0 && s <= 1.0)) throw Error(Errc::kInvalidValue, "scale factor s must lie in (0, 1]");
  if (!(std::isfinite(P) && P > 0.0)) throw Error(Errc::kInvalidValue, "P must be finite and positive");
  if (!(std::isfinite(F) && F > 0.0)) throw Error(Errc::kInvalidValue, "F must be finite and positive");
}

double score(double quality, double accounted_params, double flops, const ScoreParams& sp) {
  double result = quality;
  if (sp.size_factor_enabled) result *= std::pow(sp.s, accounted_params / sp.P);
  if (sp.compute_factor_enabled) result *= std::pow(sp.s, flops / sp.F);
  return result;
}

ScoreParams calibrate(const SystemState& system, double multiplier) {
  if (system.models().empty()) throw Error(Errc::kState, "cannot calibrate an empty system");
  if (!(std::isfinite(multiplier) && multiplier > 0.0))
    throw Error(Errc::kInvalidValue, "calibration multiplier must be positive");
  double params = 0.0;
  double flops = 0.0;
  for (const auto& [id, m] : system.models()) {
    params += accounted_params(system, m);
    flops += static_cast<double>(inference_flops(system, m));
  }
  const double n = static_cast<double>(system.models().size());
  ScoreParams out = system.score_params();
  out.P = multiplier * params / n;
  out.F = multiplier * flops / n;
  return out;
}

}  // namespace evomt

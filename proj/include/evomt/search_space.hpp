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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evomt/rng.hpp"

namespace evomt {

namespace axes {
inline constexpr std::string_view kLearningRate = "learning_rate";
inline constexpr std::string_view kWarmupRatio = "warmup_ratio";
inline constexpr std::string_view kMomentum = "momentum";
inline constexpr std::string_view kNesterov = "nesterov";
inline constexpr std::string_view kCropAreaMin = "crop_area_min";
inline constexpr std::string_view kCropAspectMin = "crop_aspect_min";
inline constexpr std::string_view kFlip = "flip";
inline constexpr std::string_view kBrightnessDelta = "brightness_delta";
inline constexpr std::string_view kContrastDelta = "contrast_delta";
inline constexpr std::string_view kSaturationDelta = "saturation_delta";
inline constexpr std::string_view kHueDelta = "hue_delta";
inline constexpr std::string_view kQualityDelta = "quality_delta";
inline constexpr std::string_view kResolution = "resolution";
}  // namespace axes

enum class AxisKind { kReal, kBool, kToken };

/// One tunable hyperparameter: an ordered, duplicate-free sequence of valid
/// values. Booleans are the two-element sequence False < True; tokens are
/// ordered as listed and carry their position as numeric value.
struct HparamAxis {
  std::string name;
  AxisKind kind = AxisKind::kReal;
  std::vector<std::string> labels;
  std::vector<double> values;
  std::size_t default_index = 0;

  std::size_t size() const { return values.size(); }
  // Throws Errc::kInvalidValue when value is not a member.
  std::size_t index_of(double value) const;
  bool contains(double value) const;
};

/// One value index per axis, aligned with SearchSpace::axes().
struct HparamConfig {
  std::vector<std::size_t> index;

  friend bool operator==(const HparamConfig&, const HparamConfig&) = default;
};

class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<HparamAxis> axes);

  // Line format: `name | v1,v2,...,vk | default_index`; '#' starts a comment.
  static SearchSpace parse(std::string_view text);
  static SearchSpace load(const std::filesystem::path& path);
  // The full optimizer and preprocessing table with its published defaults.
  static SearchSpace canonical();
  std::string serialize() const;

  const std::vector<HparamAxis>& axes() const { return axes_; }
  bool has_axis(std::string_view name) const;
  std::size_t axis_index(std::string_view name) const;
  const HparamAxis& axis(std::string_view name) const;

  HparamConfig default_config() const;
  void validate(const HparamConfig& config) const;

  double value(const HparamConfig& config, std::string_view name) const;
  const std::string& label(const HparamConfig& config, std::string_view name) const;

  friend bool operator==(const SearchSpace& a, const SearchSpace& b) {
    return a.serialize() == b.serialize();
  }

 private:
  std::vector<HparamAxis> axes_;
};

std::vector<double> neighbor_values(const HparamAxis& axis, double value);
double step_value(const HparamAxis& axis, double value, Rng& rng);
std::size_t step_index(const HparamAxis& axis, std::size_t index, Rng& rng);

/// Mutation probabilities live on the grid {0.02, 0.04, ..., 0.30}; values
/// are carried as integer steps k with probability 0.02 * k.
struct MuGrid {
  static constexpr int kMinStep = 1;
  static constexpr int kMaxStep = 15;
  static constexpr int kInitStep = 10;
  static constexpr double kStep = 0.02;

  static double value(int step) { return kStep * step; }
  static bool on_grid(int step) { return step >= kMinStep && step <= kMaxStep; }
  // Throws Errc::kInvalidValue for off-grid probabilities.
  static int to_step(double probability);
};

std::vector<double> mu_neighbors(double probability);
int step_mu(int step, Rng& rng);

}  // namespace evomt

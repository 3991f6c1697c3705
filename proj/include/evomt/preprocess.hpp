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

#include <cstdint>
#include <span>
#include <vector>

#include "evomt/rng.hpp"
#include "evomt/search_space.hpp"

namespace evomt {

/// Real-valued HWC image.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// The preprocessing hyperparameters of one configuration. Every field at
/// its neutral value disables the corresponding stage.
struct PreprocessSettings {
  double crop_area_min = 1.0;
  double crop_aspect_min = 1.0;
  bool flip = false;
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double hue = 0.0;
  double quality = 0.0;
  int resolution = 0;

  // Axes missing from the space keep their neutral value; a missing
  // resolution axis falls back to fallback_resolution.
  static PreprocessSettings from(const SearchSpace& space, const HparamConfig& config, int fallback_resolution);
};

/// Training mode: random crop (area and aspect bounded by the settings),
/// bilinear resize, optional horizontal flip, brightness / contrast /
/// saturation / hue jitter, quantization to fewer levels, then [-1, 1].
/// Evaluation mode is the full-image resize and scaling only and never
/// touches rng.
Image preprocess(std::span<const std::uint8_t> pixels, int height, int width, int channels,
                 const PreprocessSettings& settings, Rng* rng, bool train_mode);

// Bilinear resize of the crop window with half-pixel centres.
Image resize_window(const Image& src, int x0, int y0, int crop_w, int crop_h, int out_h, int out_w);

}  // namespace evomt

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

#include "evomt/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "evomt/error.hpp"

namespace evomt {

namespace {

double axis_value(const SearchSpace& space, const HparamConfig& config, std::string_view name, double fallback) {
  return space.has_axis(name) ? space.value(config, name) : fallback;
}

}  // namespace

PreprocessSettings PreprocessSettings::from(const SearchSpace& space, const HparamConfig& config,
                                            int fallback_resolution) {
  PreprocessSettings s;
  s.crop_area_min = axis_value(space, config, axes::kCropAreaMin, 1.0);
  s.crop_aspect_min = axis_value(space, config, axes::kCropAspectMin, 1.0);
  s.flip = axis_value(space, config, axes::kFlip, 0.0) != 0.0;
  s.brightness = axis_value(space, config, axes::kBrightnessDelta, 0.0);
  s.contrast = axis_value(space, config, axes::kContrastDelta, 0.0);
  s.saturation = axis_value(space, config, axes::kSaturationDelta, 0.0);
  s.hue = axis_value(space, config, axes::kHueDelta, 0.0);
  s.quality = axis_value(space, config, axes::kQualityDelta, 0.0);
  s.resolution = static_cast<int>(
      std::lround(axis_value(space, config, axes::kResolution, static_cast<double>(fallback_resolution))));
  return s;
}

Image resize_window(const Image& src, int x0, int y0, int crop_w, int crop_h, int out_h, int out_w) {
  Image out{out_h, out_w, src.channels, std::vector<float>(static_cast<std::size_t>(out_h) * out_w * src.channels)};
  const double sx = static_cast<double>(crop_w) / out_w;
  const double sy = static_cast<double>(crop_h) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = std::clamp(y0 + (oy + 0.5) * sy - 0.5, static_cast<double>(y0), static_cast<double>(y0 + crop_h - 1));
    int ya = static_cast<int>(std::floor(fy));
    int yb = std::min(ya + 1, y0 + crop_h - 1);
    double wy = fy - ya;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx =
          std::clamp(x0 + (ox + 0.5) * sx - 0.5, static_cast<double>(x0), static_cast<double>(x0 + crop_w - 1));
      int xa = static_cast<int>(std::floor(fx));
      int xb = std::min(xa + 1, x0 + crop_w - 1);
      double wx = fx - xa;
      for (int c = 0; c < src.channels; ++c) {
        double top = src.at(ya, xa, c) * (1 - wx) + src.at(ya, xb, c) * wx;
        double bottom = src.at(yb, xa, c) * (1 - wx) + src.at(yb, xb, c) * wx;
        out.at(oy, ox, c) = static_cast<float>(top * (1 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

Image preprocess(std::span<const std::uint8_t> pixels, int height, int width, int channels,
                 const PreprocessSettings& settings, Rng* rng, bool train_mode) {
  if (height <= 0 || width <= 0 || channels <= 0 ||
      pixels.size() != static_cast<std::size_t>(height) * width * channels)
    throw Error(Errc::kShapeMismatch, "image buffer does not match its dimensions");
  if (settings.resolution <= 0) throw Error(Errc::kInvalidValue, "resolution must be positive");
  if (train_mode && !rng) throw Error(Errc::kState, "training preprocessing needs an rng");

  Image img{height, width, channels, std::vector<float>(pixels.size())};
  for (std::size_t i = 0; i < pixels.size(); ++i) img.data[i] = pixels[i] / 255.0f;

  int x0 = 0, y0 = 0, cw = width, ch = height;
  if (train_mode && (settings.crop_area_min < 1.0 || settings.crop_aspect_min < 1.0)) {
    const double area = rng->uniform(settings.crop_area_min, 1.0);
    const double log_r = std::log(settings.crop_aspect_min);
    const double aspect = std::exp(rng->uniform(log_r, -log_r));
    cw = std::clamp(static_cast<int>(std::lround(width * std::sqrt(area * aspect))), 1, width);
    ch = std::clamp(static_cast<int>(std::lround(height * std::sqrt(area / aspect))), 1, height);
    x0 = static_cast<int>(rng->index(static_cast<std::uint64_t>(width - cw + 1)));
    y0 = static_cast<int>(rng->index(static_cast<std::uint64_t>(height - ch + 1)));
  }
  Image out = resize_window(img, x0, y0, cw, ch, settings.resolution, settings.resolution);

  if (train_mode) {
    const int n = out.height * out.width;
    if (settings.flip && rng->bernoulli(0.5)) {
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width / 2; ++x)
          for (int c = 0; c < channels; ++c) std::swap(out.at(y, x, c), out.at(y, out.width - 1 - x, c));
    }
    bool jittered = false;
    if (settings.brightness > 0.0) {
      const float delta = static_cast<float>(rng->uniform(-settings.brightness, settings.brightness));
      for (float& v : out.data) v += delta;
      jittered = true;
    }
    if (settings.contrast > 0.0) {
      const double factor = rng->uniform(1.0 - settings.contrast, 1.0 + settings.contrast);
      for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += out.data[static_cast<std::size_t>(i) * channels + c];
        mean /= n;
        for (int i = 0; i < n; ++i) {
          float& v = out.data[static_cast<std::size_t>(i) * channels + c];
          v = static_cast<float>((v - mean) * factor + mean);
        }
      }
      jittered = true;
    }
    if (channels == 3 && settings.saturation > 0.0) {
      const double factor = rng->uniform(1.0 - settings.saturation, 1.0 + settings.saturation);
      for (int i = 0; i < n; ++i) {
        float* p = &out.data[static_cast<std::size_t>(i) * 3];
        const double gray = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        for (int c = 0; c < 3; ++c) p[c] = static_cast<float>(gray + (p[c] - gray) * factor);
      }
      jittered = true;
    }
    if (channels == 3 && settings.hue > 0.0) {
      // Rotation of the chroma plane in YIQ space; delta is a fraction of a turn.
      const double theta = 6.283185307179586 * rng->uniform(-settings.hue, settings.hue);
      const double cs = std::cos(theta), sn = std::sin(theta);
      for (int i = 0; i < n; ++i) {
        float* p = &out.data[static_cast<std::size_t>(i) * 3];
        const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        const double ci = 0.596 * p[0] - 0.274 * p[1] - 0.322 * p[2];
        const double cq = 0.211 * p[0] - 0.523 * p[1] + 0.312 * p[2];
        const double i2 = ci * cs - cq * sn;
        const double q2 = ci * sn + cq * cs;
        p[0] = static_cast<float>(y + 0.956 * i2 + 0.621 * q2);
        p[1] = static_cast<float>(y - 0.272 * i2 - 0.647 * q2);
        p[2] = static_cast<float>(y - 1.106 * i2 + 1.703 * q2);
      }
      jittered = true;
    }
    if (jittered)
      for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
    if (settings.quality > 0.0) {
      const double levels = std::max(2.0, std::round(1.0 / (settings.quality * rng->uniform() + 1.0 / 255.0)));
      const double steps = levels - 1.0;
      for (float& v : out.data) v = static_cast<float>(std::round(v * steps) / steps);
    }
  }
  for (float& v : out.data) v = 2.0f * v - 1.0f;
  return out;
}

}  // namespace evomt

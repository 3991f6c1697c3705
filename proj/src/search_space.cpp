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

#include "evomt/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evomt/error.hpp"

namespace evomt {

namespace {

constexpr std::string_view kCanonicalTable = R"(# Optimizer
learning_rate | 0.0001,0.0002,0.0005,0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.5 | 6
warmup_ratio | 0,0.01,0.02,0.05,0.1,0.2,0.3 | 4
momentum | 0.5,0.6,0.7,0.75,0.8,0.85,0.9,0.95,0.98,0.99 | 6
nesterov | False,True | 0
# Preprocessing
crop_area_min | 0.05,0.5,0.95,1.0 | 3
crop_aspect_min | 0.5,0.75,1.0 | 2
flip | False,True | 0
brightness_delta | 0.0,0.01,0.02,0.05,0.1,0.2 | 0
contrast_delta | 0.0,0.01,0.02,0.05,0.1,0.2 | 0
saturation_delta | 0.0,0.01,0.02,0.05,0.1,0.2 | 0
hue_delta | 0.0,0.01,0.02,0.05,0.1,0.2 | 0
quality_delta | 0.0,0.01,0.02,0.05,0.1,0.2 | 0
resolution | 224,384 | 1
)";

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

bool is_bool_label(const std::string& s) {
  return s == "False" || s == "True" || s == "false" || s == "true";
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

HparamAxis make_axis(std::string name, const std::vector<std::string>& labels,
                     std::size_t default_index, std::size_t line_no) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::kParse, "axis table line " + std::to_string(line_no) + " (" + name + "): " + why);
  };
  if (name.empty()) fail("empty axis name");
  if (labels.empty()) fail("no values");
  HparamAxis axis;
  axis.name = std::move(name);
  axis.labels = labels;
  bool all_numeric = true;
  bool all_bool = true;
  for (const auto& l : labels) {
    double v;
    if (l.empty()) fail("empty value");
    all_numeric = all_numeric && parse_double(l, v);
    all_bool = all_bool && is_bool_label(l);
  }
  if (all_numeric) {
    axis.kind = AxisKind::kReal;
    for (const auto& l : labels) {
      double v = 0;
      parse_double(l, v);
      axis.values.push_back(v);
    }
    for (std::size_t i = 1; i < axis.values.size(); ++i)
      if (!(axis.values[i] > axis.values[i - 1])) fail("values must be strictly increasing");
  } else if (all_bool) {
    axis.kind = AxisKind::kBool;
    if (labels.size() != 2 || (labels[0] != "False" && labels[0] != "false") ||
        (labels[1] != "True" && labels[1] != "true"))
      fail("boolean axis must be exactly False,True");
    axis.values = {0.0, 1.0};
  } else {
    axis.kind = AxisKind::kToken;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j)
        if (labels[i] == labels[j]) fail("duplicate token " + labels[i]);
      axis.values.push_back(static_cast<double>(i));
    }
  }
  if (default_index >= axis.values.size()) fail("default index out of range");
  axis.default_index = default_index;
  return axis;
}

}  // namespace

std::size_t HparamAxis::index_of(double value) const {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (close(values[i], value)) return i;
  std::ostringstream os;
  os << "value " << value << " is not a member of axis " << name;
  throw Error(Errc::kInvalidValue, os.str());
}

bool HparamAxis::contains(double value) const {
  return std::any_of(values.begin(), values.end(), [&](double v) { return close(v, value); });
}

SearchSpace::SearchSpace(std::vector<HparamAxis> axes) : axes_(std::move(axes)) {
  for (std::size_t i = 0; i < axes_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (axes_[i].name == axes_[j].name)
        throw Error(Errc::kParse, "duplicate axis " + axes_[i].name);
}

SearchSpace SearchSpace::parse(std::string_view text) {
  std::vector<HparamAxis> axes;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    auto fields = split(line, '|');
    if (fields.size() != 3)
      throw Error(Errc::kParse, "axis table line " + std::to_string(line_no) + ": expected 3 '|' fields");
    std::size_t def = 0;
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), def);
    if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size())
      throw Error(Errc::kParse, "axis table line " + std::to_string(line_no) + ": bad default index");
    axes.push_back(make_axis(fields[0], split(fields[1], ','), def, line_no));
  }
  return SearchSpace(std::move(axes));
}

SearchSpace SearchSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open axis table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

SearchSpace SearchSpace::canonical() { return parse(kCanonicalTable); }

std::string SearchSpace::serialize() const {
  std::string out;
  for (const auto& a : axes_) {
    out += a.name + " | ";
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (i) out += ',';
      out += a.labels[i];
    }
    out += " | " + std::to_string(a.default_index) + "\n";
  }
  return out;
}

bool SearchSpace::has_axis(std::string_view name) const {
  return std::any_of(axes_.begin(), axes_.end(), [&](const HparamAxis& a) { return a.name == name; });
}

std::size_t SearchSpace::axis_index(std::string_view name) const {
  for (std::size_t i = 0; i < axes_.size(); ++i)
    if (axes_[i].name == name) return i;
  throw Error(Errc::kNotFound, "unknown hyperparameter axis " + std::string(name));
}

const HparamAxis& SearchSpace::axis(std::string_view name) const { return axes_[axis_index(name)]; }

HparamConfig SearchSpace::default_config() const {
  HparamConfig c;
  for (const auto& a : axes_) c.index.push_back(a.default_index);
  return c;
}

void SearchSpace::validate(const HparamConfig& config) const {
  if (config.index.size() != axes_.size())
    throw Error(Errc::kInvalidValue, "configuration has " + std::to_string(config.index.size()) +
                                         " entries, space has " + std::to_string(axes_.size()) + " axes");
  for (std::size_t i = 0; i < axes_.size(); ++i)
    if (config.index[i] >= axes_[i].size())
      throw Error(Errc::kInvalidValue, "value index out of range for axis " + axes_[i].name);
}

double SearchSpace::value(const HparamConfig& config, std::string_view name) const {
  return axes_[axis_index(name)].values.at(config.index.at(axis_index(name)));
}

const std::string& SearchSpace::label(const HparamConfig& config, std::string_view name) const {
  return axes_[axis_index(name)].labels.at(config.index.at(axis_index(name)));
}

std::vector<double> neighbor_values(const HparamAxis& axis, double value) {
  std::size_t i = axis.index_of(value);
  std::vector<double> out;
  if (i > 0) out.push_back(axis.values[i - 1]);
  if (i + 1 < axis.size()) out.push_back(axis.values[i + 1]);
  return out;
}

std::size_t step_index(const HparamAxis& axis, std::size_t index, Rng& rng) {
  if (index >= axis.size()) throw Error(Errc::kInvalidValue, "index out of range for axis " + axis.name);
  if (axis.size() < 2) return index;
  if (index == 0) return 1;
  if (index + 1 == axis.size()) return index - 1;
  return rng.bernoulli(0.5) ? index - 1 : index + 1;
}

double step_value(const HparamAxis& axis, double value, Rng& rng) {
  return axis.values[step_index(axis, axis.index_of(value), rng)];
}

int MuGrid::to_step(double probability) {
  double k = probability / kStep;
  int step = static_cast<int>(std::lround(k));
  if (std::abs(k - step) > 1e-9 || !on_grid(step)) {
    std::ostringstream os;
    os << "mutation probability " << probability << " is not on the grid";
    throw Error(Errc::kInvalidValue, os.str());
  }
  return step;
}

std::vector<double> mu_neighbors(double probability) {
  int k = MuGrid::to_step(probability);
  std::vector<double> out;
  if (k > MuGrid::kMinStep) out.push_back(MuGrid::value(k - 1));
  if (k < MuGrid::kMaxStep) out.push_back(MuGrid::value(k + 1));
  return out;
}

int step_mu(int step, Rng& rng) {
  if (!MuGrid::on_grid(step)) throw Error(Errc::kInvalidValue, "mutation probability step off grid");
  if (step == MuGrid::kMinStep) return step + 1;
  if (step == MuGrid::kMaxStep) return step - 1;
  return rng.bernoulli(0.5) ? step - 1 : step + 1;
}

}  // namespace evomt

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

#include "evomt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "evomt/error.hpp"
#include "evomt/rng.hpp"

namespace fs = std::filesystem;

namespace evomt {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& why) {
  throw Error(Errc::kParse, "task spec line " + std::to_string(line) + ": " + why);
}

std::size_t task_index(const SyntheticSpec& spec, const std::string& name) {
  for (std::size_t i = 0; i < spec.tasks.size(); ++i)
    if (spec.tasks[i].name == name) return i;
  throw Error(Errc::kInvalidValue, "task spec: unknown task " + name);
}

}  // namespace

void SyntheticSpec::validate() const {
  auto bad = [](const std::string& why) { throw Error(Errc::kInvalidValue, "task spec: " + why); };
  if (height <= 0 || width <= 0 || channels <= 0) bad("dims must be positive");
  if (tile <= 0) bad("tile must be positive");
  if (!(noise >= 0.0)) bad("noise must be non-negative");
  if (tasks.empty()) bad("no tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    if (t.name.empty()) bad("empty task name");
    if (t.classes < 1 || t.classes > 65535) bad("task " + t.name + ": classes out of range");
    if (t.train <= 0 || t.val <= 0 || t.test <= 0) bad("task " + t.name + ": split sizes must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (tasks[j].name == t.name) bad("duplicate task " + t.name);
  }
  for (const auto& r : relations) {
    task_index(*this, r.from);
    task_index(*this, r.to);
    if (r.from == r.to) bad("task related to itself");
    if (!(r.fraction >= 0.0 && r.fraction <= 1.0)) bad("relation fraction must lie in [0, 1]");
  }
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
  SyntheticSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "dims") {
      if (!(ls >> spec.height >> spec.width >> spec.channels)) fail(line_no, "dims needs h w c");
    } else if (key == "tile") {
      if (!(ls >> spec.tile)) fail(line_no, "tile needs a size");
    } else if (key == "noise") {
      if (!(ls >> spec.noise)) fail(line_no, "noise needs a value");
    } else if (key == "task") {
      SyntheticTaskSpec t;
      if (!(ls >> t.name >> t.classes >> t.train >> t.val >> t.test))
        fail(line_no, "task needs name classes train val test");
      spec.tasks.push_back(t);
    } else if (key == "relate") {
      SyntheticRelation r;
      if (!(ls >> r.from >> r.to >> r.fraction)) fail(line_no, "relate needs from to fraction");
      spec.relations.push_back(r);
    } else {
      fail(line_no, "unknown record '" + key + "'");
    }
    std::string extra;
    if (ls >> extra) fail(line_no, "trailing input '" + extra + "'");
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open task spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synthetic_spec(ss.str());
}

std::vector<std::vector<std::vector<float>>> synthetic_prototypes(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t tile_size = static_cast<std::size_t>(spec.tile) * spec.tile * spec.channels;
  std::vector<std::vector<std::vector<float>>> protos(spec.tasks.size());
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    Rng rng(seed, "prototypes/" + spec.tasks[t].name);
    for (int k = 0; k < spec.tasks[t].classes; ++k) {
      std::vector<float> p(tile_size);
      for (float& v : p) v = static_cast<float>(rng.uniform(0.1, 0.9));
      protos[t].push_back(std::move(p));
    }
  }
  for (const auto& r : spec.relations) {
    const std::size_t from = task_index(spec, r.from), to = task_index(spec, r.to);
    const std::size_t limit = std::min(protos[from].size(), protos[to].size());
    const auto shared = std::min(limit, static_cast<std::size_t>(std::ceil(r.fraction * protos[to].size() - 1e-9)));
    for (std::size_t k = 0; k < shared; ++k) protos[to][k] = protos[from][k];
  }
  return protos;
}

std::vector<TaskDataset> generate_synthetic_tasks(const SyntheticSpec& spec, std::uint64_t seed) {
  const auto protos = synthetic_prototypes(spec, seed);
  std::vector<TaskDataset> out;
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    const auto& ts = spec.tasks[t];
    TaskDataset d;
    d.info = {ts.name, "", ts.classes, spec.height, spec.width, spec.channels};
    Rng rng(seed, "samples/" + ts.name);
    auto fill = [&](Split& split, int count) {
      split.height = spec.height;
      split.width = spec.width;
      split.channels = spec.channels;
      split.pixels.resize(static_cast<std::size_t>(count) * split.image_bytes());
      split.labels.resize(static_cast<std::size_t>(count));
      std::size_t px = 0;
      for (int i = 0; i < count; ++i) {
        const int label = static_cast<int>(rng.index(static_cast<std::uint64_t>(ts.classes)));
        split.labels[static_cast<std::size_t>(i)] = label;
        const auto& proto = protos[t][static_cast<std::size_t>(label)];
        for (int y = 0; y < spec.height; ++y)
          for (int x = 0; x < spec.width; ++x)
            for (int c = 0; c < spec.channels; ++c) {
              const std::size_t pi =
                  (static_cast<std::size_t>(y % spec.tile) * spec.tile + x % spec.tile) * spec.channels + c;
              const double v = std::clamp(proto[pi] + spec.noise * rng.normal(), 0.0, 1.0);
              split.pixels[px++] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
      }
    };
    fill(d.train, ts.train);
    fill(d.val, ts.val);
    fill(d.test, ts.test);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<fs::path> write_synthetic_tasks(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  std::vector<fs::path> dirs;
  for (auto& d : generate_synthetic_tasks(spec, seed)) {
    const fs::path dir = out_dir / d.info.name;
    d.info.dir = dir.string();
    save_task(dir, d);
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace evomt

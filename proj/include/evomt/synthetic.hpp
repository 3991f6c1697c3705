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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evomt/dataset.hpp"

namespace evomt {

struct SyntheticTaskSpec {
  std::string name;
  int classes = 0;
  int train = 0;
  int val = 0;
  int test = 0;
};

struct SyntheticRelation {
  std::string from;
  std::string to;
  double fraction = 0.0;
};

/// Each class is a random tile x tile x c texture repeated over the image;
/// samples add per-pixel Gaussian noise. A relation copies the first
/// ceil(fraction * classes) prototypes of `from` into `to`.
struct SyntheticSpec {
  int height = 16;
  int width = 16;
  int channels = 3;
  int tile = 4;
  double noise = 0.2;
  std::vector<SyntheticTaskSpec> tasks;
  std::vector<SyntheticRelation> relations;

  void validate() const;
};

// Records: `dims <h> <w> <c>`, `tile <n>`, `noise <sigma>`,
// `task <name> <classes> <train> <val> <test>`, `relate <from> <to> <fraction>`.
SyntheticSpec parse_synthetic_spec(std::string_view text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// Prototype textures per task after relations are applied, each
/// tile * tile * channels values in [0, 1].
std::vector<std::vector<std::vector<float>>> synthetic_prototypes(const SyntheticSpec& spec, std::uint64_t seed);

std::vector<TaskDataset> generate_synthetic_tasks(const SyntheticSpec& spec, std::uint64_t seed);
/// Writes one dataset directory per task under out_dir.
std::vector<std::filesystem::path> write_synthetic_tasks(const SyntheticSpec& spec, std::uint64_t seed,
                                                         const std::filesystem::path& out_dir);

}  // namespace evomt

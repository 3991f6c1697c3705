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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evomt/model.hpp"

namespace evomt {

/// One split of a task: 8-bit HWC images, row-major, plus integer labels.
struct Split {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_bytes() const { return static_cast<std::size_t>(height) * width * channels; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * image_bytes(), image_bytes()};
  }
};

struct TaskDataset {
  TaskInfo info;
  Split train;
  Split val;
  Split test;
};

// Split files: "MTDS", u32 count, u32 h, u32 w, u32 c, then per sample
// h*w*c pixel bytes and a u16 label; all integers little-endian.
void write_split(const std::filesystem::path& path, const Split& split);
Split read_split(const std::filesystem::path& path);

// meta: UTF-8 `key=value` lines with name, classes, h, w, c.
void write_meta(const std::filesystem::path& dir, const TaskInfo& info);
TaskInfo read_meta(const std::filesystem::path& dir);

TaskDataset load_task(const std::filesystem::path& dir);
void save_task(const std::filesystem::path& dir, const TaskDataset& data);

/// Task directories (those holding a meta file) directly under root, by name.
std::vector<TaskInfo> scan_tasks(const std::filesystem::path& root);

/// Loads datasets on first use; entries stay valid for the cache lifetime.
class DatasetCache {
 public:
  const TaskDataset& get(const TaskInfo& info);
  void insert(TaskDataset data);

 private:
  std::map<TaskId, std::unique_ptr<TaskDataset>> data_;
};

}  // namespace evomt

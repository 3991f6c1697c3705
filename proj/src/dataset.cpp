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

#include "evomt/dataset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "evomt/error.hpp"

namespace fs = std::filesystem;

namespace evomt {

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'T', 'D', 'S'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const fs::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::kParse, "truncated dataset file " + path.string());
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

int parse_positive(const std::string& key, const std::string& value, const fs::path& dir) {
  try {
    std::size_t used = 0;
    int v = std::stoi(value, &used);
    if (used == value.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::kParse, "meta in " + dir.string() + ": bad value for " + key);
}

}  // namespace

void write_split(const fs::path& path, const Split& split) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
  os.write(kMagic.data(), 4);
  put_u32(os, static_cast<std::uint32_t>(split.size()));
  put_u32(os, static_cast<std::uint32_t>(split.height));
  put_u32(os, static_cast<std::uint32_t>(split.width));
  put_u32(os, static_cast<std::uint32_t>(split.channels));
  for (std::size_t i = 0; i < split.size(); ++i) {
    auto img = split.image(i);
    os.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    const auto label = static_cast<std::uint16_t>(split.labels[i]);
    unsigned char lb[2] = {static_cast<unsigned char>(label), static_cast<unsigned char>(label >> 8)};
    os.write(reinterpret_cast<const char*>(lb), 2);
  }
  if (!os) throw Error(Errc::kIo, "failed writing " + path.string());
}

Split read_split(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kMagic) throw Error(Errc::kParse, "bad magic in " + path.string());
  Split s;
  const std::uint32_t count = get_u32(is, path);
  s.height = static_cast<int>(get_u32(is, path));
  s.width = static_cast<int>(get_u32(is, path));
  s.channels = static_cast<int>(get_u32(is, path));
  if (s.height <= 0 || s.width <= 0 || s.channels <= 0) throw Error(Errc::kParse, "bad dims in " + path.string());
  s.pixels.resize(static_cast<std::size_t>(count) * s.image_bytes());
  s.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(s.pixels.data() + i * s.image_bytes()),
                 static_cast<std::streamsize>(s.image_bytes())))
      throw Error(Errc::kParse, "truncated dataset file " + path.string());
    unsigned char lb[2];
    if (!is.read(reinterpret_cast<char*>(lb), 2)) throw Error(Errc::kParse, "truncated dataset file " + path.string());
    s.labels[i] = lb[0] | (lb[1] << 8);
  }
  return s;
}

void write_meta(const fs::path& dir, const TaskInfo& info) {
  std::ofstream os(dir / "meta", std::ios::trunc);
  if (!os) throw Error(Errc::kIo, "cannot write meta in " + dir.string());
  os << "name=" << info.name << "\nclasses=" << info.num_classes << "\nh=" << info.height << "\nw=" << info.width
     << "\nc=" << info.channels << "\n";
}

TaskInfo read_meta(const fs::path& dir) {
  std::ifstream is(dir / "meta");
  if (!is) throw Error(Errc::kIo, "cannot open meta in " + dir.string());
  TaskInfo info;
  info.dir = dir.string();
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::kParse, "meta in " + dir.string() + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "name")
      info.name = value;
    else if (key == "classes")
      info.num_classes = parse_positive(key, value, dir);
    else if (key == "h")
      info.height = parse_positive(key, value, dir);
    else if (key == "w")
      info.width = parse_positive(key, value, dir);
    else if (key == "c")
      info.channels = parse_positive(key, value, dir);
  }
  if (info.name.empty() || info.num_classes == 0 || info.height == 0 || info.width == 0 || info.channels == 0)
    throw Error(Errc::kParse, "meta in " + dir.string() + " is incomplete");
  return info;
}

TaskDataset load_task(const fs::path& dir) {
  TaskDataset d;
  d.info = read_meta(dir);
  d.train = read_split(dir / "train.bin");
  d.val = read_split(dir / "val.bin");
  d.test = read_split(dir / "test.bin");
  for (const Split* s : {&d.train, &d.val, &d.test}) {
    if (s->height != d.info.height || s->width != d.info.width || s->channels != d.info.channels)
      throw Error(Errc::kShapeMismatch, "split dims disagree with meta in " + dir.string());
    for (int l : s->labels)
      if (l < 0 || l >= d.info.num_classes)
        throw Error(Errc::kInvalidValue, "label out of range in " + dir.string());
  }
  return d;
}

void save_task(const fs::path& dir, const TaskDataset& data) {
  fs::create_directories(dir);
  write_meta(dir, data.info);
  write_split(dir / "train.bin", data.train);
  write_split(dir / "val.bin", data.val);
  write_split(dir / "test.bin", data.test);
}

std::vector<TaskInfo> scan_tasks(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(Errc::kIo, "not a directory: " + root.string());
  std::vector<TaskInfo> out;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "meta")) out.push_back(read_meta(entry.path()));
  std::sort(out.begin(), out.end(), [](const TaskInfo& a, const TaskInfo& b) { return a.name < b.name; });
  return out;
}

const TaskDataset& DatasetCache::get(const TaskInfo& info) {
  auto it = data_.find(info.name);
  if (it != data_.end()) return *it->second;
  auto d = std::make_unique<TaskDataset>(load_task(info.dir));
  if (d->info.name != info.name)
    throw Error(Errc::kInvalidValue, "dataset in " + info.dir + " is named " + d->info.name);
  return *data_.emplace(info.name, std::move(d)).first->second;
}

void DatasetCache::insert(TaskDataset data) {
  TaskId name = data.info.name;
  data_[name] = std::make_unique<TaskDataset>(std::move(data));
}

}  // namespace evomt

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

#include "evomt/system_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "evomt/error.hpp"

namespace evomt {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kEmbedding: return "embedding";
    case LayerKind::kHidden: return "hidden";
    case LayerKind::kHead: return "head";
  }
  return "hidden";
}

LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "embedding") return LayerKind::kEmbedding;
  if (s == "hidden") return LayerKind::kHidden;
  if (s == "head") return LayerKind::kHead;
  throw Error(Errc::kParse, "unknown layer kind " + std::string(s));
}

LayerBlock LayerBlock::zeros(LayerKind kind, int d_in, int d_out) {
  LayerBlock b;
  b.kind = kind;
  b.d_in = d_in;
  b.d_out = d_out;
  b.params.assign(dense_size(d_in, d_out), 0.0f);
  b.opt_state.assign(b.params.size(), 0.0f);
  return b;
}

std::uint64_t block_digest(const LayerBlock& block) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::vector<float>& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  feed(block.params);
  feed(block.opt_state);
  return h;
}

SystemState::SystemState(SearchSpace space, BackboneGeometry geometry, std::uint64_t seed)
    : space_(std::move(space)), geometry_(geometry), rng_(seed, "system") {}

void SystemState::set_score_params(const ScoreParams& sp) {
  sp.validate();
  score_params_ = sp;
}

void SystemState::register_task(const TaskInfo& info) {
  if (info.name.empty() || info.name == kRootTask)
    throw Error(Errc::kInvalidValue, "invalid task name '" + info.name + "'");
  if (info.num_classes <= 0) throw Error(Errc::kInvalidValue, "task " + info.name + " has no classes");
  if (info.channels != geometry_.channels)
    throw Error(Errc::kShapeMismatch, "task " + info.name + " has " + std::to_string(info.channels) +
                                          " channels, backbone expects " + std::to_string(geometry_.channels));
  tasks_[info.name] = info;
}

const TaskInfo& SystemState::task(const TaskId& task) const {
  auto it = tasks_.find(task);
  if (it == tasks_.end()) throw Error(Errc::kNotFound, "unknown task " + task);
  return it->second;
}

const LayerBlock& SystemState::block(BlockId id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw Error(Errc::kNotFound, "unknown layer block " + std::to_string(id));
  return it->second;
}

LayerBlock& SystemState::mutable_block(BlockId id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw Error(Errc::kNotFound, "unknown layer block " + std::to_string(id));
  return it->second;
}

const std::set<ModelId>& SystemState::users(BlockId id) const {
  auto it = users_.find(id);
  if (it == users_.end()) throw Error(Errc::kNotFound, "unknown layer block " + std::to_string(id));
  return it->second;
}

void SystemState::set_id_counters(BlockId next_block, ModelId next_model) {
  next_block_id_ = next_block;
  next_model_id_ = next_model;
}

const ModelSpec& SystemState::model(ModelId id) const {
  auto it = models_.find(id);
  if (it == models_.end()) throw Error(Errc::kNotFound, "unknown model " + std::to_string(id));
  return it->second;
}

ModelSpec& SystemState::mutable_model(ModelId id) {
  auto it = models_.find(id);
  if (it == models_.end()) throw Error(Errc::kNotFound, "unknown model " + std::to_string(id));
  return it->second;
}

std::vector<ModelId> SystemState::models_for_task(const TaskId& task) const {
  std::vector<ModelId> out;
  for (const auto& [id, m] : models_)
    if (m.task == task) out.push_back(id);
  return out;
}

void SystemState::check_structure(const ModelSpec& model) const {
  if (model.layers.size() < 3)
    throw Error(Errc::kState, "model " + std::to_string(model.id) + " needs embedding, hidden and head layers");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerBlock& b = block(model.layers[i].block);
    LayerKind expect = i == 0 ? LayerKind::kEmbedding
                       : i + 1 == model.layers.size() ? LayerKind::kHead
                                                      : LayerKind::kHidden;
    if (b.kind != expect)
      throw Error(Errc::kState, "model " + std::to_string(model.id) + " layer " + std::to_string(i) +
                                    " is " + std::string(to_string(b.kind)) + ", expected " +
                                    std::string(to_string(expect)));
    if (i > 0 && block(model.layers[i - 1].block).d_out != b.d_in)
      throw Error(Errc::kShapeMismatch, "model " + std::to_string(model.id) + " layer " +
                                            std::to_string(i) + " input width mismatch");
  }
}

void SystemState::commit_model(ModelSpec model, std::vector<LayerBlock> fresh_blocks) {
  if (model.id == 0) throw Error(Errc::kState, "model has no id");
  if (models_.count(model.id)) throw Error(Errc::kState, "model " + std::to_string(model.id) + " already committed");
  space_.validate(model.hparams);
  std::set<BlockId> fresh_ids;
  for (const auto& b : fresh_blocks) {
    if (blocks_.count(b.id) || !fresh_ids.insert(b.id).second)
      throw Error(Errc::kState, "layer block " + std::to_string(b.id) + " already exists");
    if (b.opt_state.size() != b.params.size() || b.params.size() != LayerBlock::dense_size(b.d_in, b.d_out))
      throw Error(Errc::kShapeMismatch, "layer block " + std::to_string(b.id) + " has inconsistent storage");
  }
  for (const auto& ref : model.layers) {
    if (!fresh_ids.count(ref.block) && !blocks_.count(ref.block))
      throw Error(Errc::kNotFound, "model " + std::to_string(model.id) + " references missing block " +
                                       std::to_string(ref.block));
    if (ref.trainable && !fresh_ids.count(ref.block) && !users_[ref.block].empty())
      throw Error(Errc::kState, "trainable block " + std::to_string(ref.block) + " is already in use");
  }
  for (auto& b : fresh_blocks) {
    users_[b.id];
    BlockId id = b.id;
    blocks_.emplace(id, std::move(b));
  }
  try {
    check_structure(model);
    const BlockId head = model.head().block;
    for (ModelId other : users_[head])
      if (models_.at(other).task != model.task)
        throw Error(Errc::kState, "head block " + std::to_string(head) + " belongs to another task");
  } catch (...) {
    for (BlockId id : fresh_ids) {
      blocks_.erase(id);
      users_.erase(id);
    }
    throw;
  }
  for (const auto& ref : model.layers) users_[ref.block].insert(model.id);
  ModelId id = model.id;
  models_.emplace(id, std::move(model));
}

void SystemState::discard_model(ModelId id) {
  auto it = models_.find(id);
  if (it == models_.end()) throw Error(Errc::kNotFound, "unknown model " + std::to_string(id));
  for (const auto& ref : it->second.layers) {
    auto u = users_.find(ref.block);
    if (u == users_.end()) continue;
    u->second.erase(id);
    if (u->second.empty()) {
      users_.erase(u);
      blocks_.erase(ref.block);
    }
  }
  models_.erase(it);
  for (auto s = selection_counts_.begin(); s != selection_counts_.end();) {
    if (s->first.first == id)
      s = selection_counts_.erase(s);
    else
      ++s;
  }
}

int SystemState::sharing_count(BlockId id, const TaskId& task) const {
  int n = 0;
  for (ModelId m : users(id))
    if (models_.at(m).task != task) ++n;
  return n;
}

int SystemState::selection_count(ModelId model, const TaskId& task) const {
  auto it = selection_counts_.find({model, task});
  return it == selection_counts_.end() ? 0 : it->second;
}

void SystemState::increment_selection(ModelId model, const TaskId& task) { ++selection_counts_[{model, task}]; }

void SystemState::set_selection_count(ModelId model, const TaskId& task, int count) {
  if (count < 0) throw Error(Errc::kInvalidValue, "negative selection count");
  selection_counts_[{model, task}] = count;
}

double accounted_params(const SystemState& system, const ModelSpec& model) {
  // Integer parameter totals per divisor, reduced in ascending divisor order,
  // so the result does not depend on layer order.
  std::map<int, std::int64_t> by_divisor;
  for (const auto& ref : model.layers) {
    const LayerBlock& b = system.block(ref.block);
    int others = 0;
    for (ModelId m : system.users(ref.block))
      if (m != model.id && system.model(m).task != model.task) ++others;
    by_divisor[others + 1] += static_cast<std::int64_t>(b.size());
  }
  double total = 0.0;
  for (const auto& [divisor, count] : by_divisor) total += static_cast<double>(count) / divisor;
  return total;
}

std::int64_t dense_flops(int d_in, int d_out) {
  return 2 * static_cast<std::int64_t>(d_in) * d_out + d_out;
}

int model_resolution(const SystemState& system, const ModelSpec& model) {
  return static_cast<int>(std::lround(system.space().value(model.hparams, axes::kResolution)));
}

std::int64_t inference_flops(const SystemState& system, const ModelSpec& model) {
  const auto& g = system.geometry();
  const int res = model_resolution(system, model);
  if (res <= 0 || res % g.patch != 0)
    throw Error(Errc::kShapeMismatch, "resolution " + std::to_string(res) + " is not a multiple of patch size " +
                                          std::to_string(g.patch));
  const std::int64_t patches = static_cast<std::int64_t>(res / g.patch) * (res / g.patch);
  std::int64_t total = 0;
  int prev_out = -1;
  for (const auto& ref : model.layers) {
    const LayerBlock& b = system.block(ref.block);
    if (b.kind == LayerKind::kEmbedding) {
      if (b.d_in != g.embed_in())
        throw Error(Errc::kShapeMismatch, "embedding input width does not match patch geometry");
      total += patches * dense_flops(b.d_in, b.d_out);
    } else {
      if (b.d_in != prev_out) throw Error(Errc::kShapeMismatch, "layer input width mismatch");
      total += dense_flops(b.d_in, b.d_out);
    }
    prev_out = b.d_out;
  }
  return total;
}

double model_score(const SystemState& system, const ModelSpec& model) {
  return score(model.quality, accounted_params(system, model),
               static_cast<double>(inference_flops(system, model)), system.score_params());
}

ModelId seed_root_model(SystemState& system) {
  const auto& g = system.geometry();
  Rng init = system.rng().derive("root-init");
  auto random_block = [&](LayerKind kind, int d_in, int d_out) {
    LayerBlock b = LayerBlock::zeros(kind, d_in, d_out);
    b.id = system.allocate_block_id();
    b.created_by_task = std::string(kRootTask);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(d_in) * d_out; ++i)
      b.params[i] = static_cast<float>(scale * init.normal());
    return b;
  };
  ModelSpec root;
  root.id = system.allocate_model_id();
  root.task = std::string(kRootTask);
  root.hparams = system.space().default_config();
  std::vector<LayerBlock> blocks;
  blocks.push_back(random_block(LayerKind::kEmbedding, g.embed_in(), g.width));
  for (int i = 0; i < g.root_depth; ++i) blocks.push_back(random_block(LayerKind::kHidden, g.width, g.width));
  blocks.push_back(random_block(LayerKind::kHead, g.width, g.root_classes));
  for (const auto& b : blocks) root.layers.push_back({b.id, false});
  system.commit_model(std::move(root), std::move(blocks));
  return system.models().rbegin()->first;
}

namespace {

const char* palette(std::size_t i) {
  static const char* colors[] = {"#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
                                 "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f"};
  return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

}  // namespace

std::string export_dot(const SystemState& system) {
  std::ostringstream os;
  os << "digraph system {\n  rankdir=BT;\n";
  std::map<TaskId, std::size_t> color_of;
  auto color = [&](const TaskId& t) {
    auto [it, inserted] = color_of.emplace(t, color_of.size());
    return palette(it->second);
  };
  color(std::string(kRootTask));
  for (const auto& [name, info] : system.tasks()) color(name);

  for (const auto& [id, b] : system.blocks()) {
    const char* shape = b.kind == LayerKind::kHead ? "box" : "ellipse";
    os << "  b" << id << " [label=\"" << to_string(b.kind) << " " << id << "\", shape=" << shape
       << ", style=filled, fillcolor=\"" << color(b.created_by_task) << "\"];\n";
  }
  for (const auto& [id, m] : system.models()) {
    os << "  in" << id << " [label=\"" << m.task << "\", shape=triangle, style=filled, fillcolor=\""
       << color(m.task) << "\"];\n";
  }
  for (const auto& [id, m] : system.models()) {
    std::string from = "in" + std::to_string(id);
    for (const auto& ref : m.layers) {
      std::string to = "b" + std::to_string(ref.block);
      os << "  " << from << " -> " << to << " [color=\"" << color(m.task) << "\"];\n";
      from = std::move(to);
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace evomt

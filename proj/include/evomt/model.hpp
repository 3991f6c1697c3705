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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evomt/search_space.hpp"

namespace evomt {

using BlockId = std::uint64_t;
using ModelId = std::uint64_t;
using TaskId = std::string;

enum class LayerKind { kEmbedding, kHidden, kHead };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view s);

/// A dense map d_in -> d_out: weights stored column-major (d_out x d_in)
/// followed by the bias. opt_state holds the momentum buffer, same layout.
struct LayerBlock {
  BlockId id = 0;
  LayerKind kind = LayerKind::kHidden;
  int d_in = 0;
  int d_out = 0;
  std::vector<float> params;
  std::vector<float> opt_state;
  TaskId created_by_task;
  int generation_tag = 0;

  std::size_t size() const { return params.size(); }
  static std::size_t dense_size(int d_in, int d_out) {
    return static_cast<std::size_t>(d_in) * d_out + d_out;
  }
  static LayerBlock zeros(LayerKind kind, int d_in, int d_out);
};

std::uint64_t block_digest(const LayerBlock& block);

/// Per-model mutation probability table, keyed by action key. Values are
/// MuGrid steps.
using MuTable = std::map<std::string, int>;

struct LayerRef {
  BlockId block = 0;
  bool trainable = false;

  friend bool operator==(const LayerRef&, const LayerRef&) = default;
};

struct ModelSpec {
  ModelId id = 0;
  TaskId task;
  // Embedding first, then hidden blocks bottom-to-top, then the head.
  std::vector<LayerRef> layers;
  HparamConfig hparams;
  MuTable mu;
  std::optional<ModelId> parent;
  std::vector<std::string> mutations;  // keys of the actions that produced it
  double quality = 0.0;                // validation accuracy at retention
  std::optional<double> score_snapshot;
  std::uint64_t train_steps = 0;

  int hidden_depth() const { return static_cast<int>(layers.size()) - 2; }
  const LayerRef& head() const { return layers.back(); }
};

struct TaskInfo {
  TaskId name;
  std::string dir;
  int num_classes = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
};

/// Shape of the shared backbone: patch embedding (patch*patch*channels ->
/// width), square residual hidden blocks, per-task dense heads.
struct BackboneGeometry {
  int channels = 3;
  int patch = 4;
  int width = 32;
  int root_depth = 4;
  int root_classes = 10;

  int embed_in() const { return patch * patch * channels; }
};

inline constexpr std::string_view kRootTask = "__root__";

}  // namespace evomt

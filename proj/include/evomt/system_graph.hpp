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
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evomt/model.hpp"
#include "evomt/rng.hpp"
#include "evomt/scoring.hpp"
#include "evomt/search_space.hpp"

namespace evomt {

/// The whole multitask system: the layer store, every committed model, the
/// cross-task reference structure behind the accounted-parameter cost, and
/// the per-(model, task) parent selection counts.
///
/// Mutation (commit, discard, selection bookkeeping) assumes a single writer.
/// Every block in the store is referenced by at least one committed model.
class SystemState {
 public:
  SystemState() = default;
  SystemState(SearchSpace space, BackboneGeometry geometry, std::uint64_t seed);

  const SearchSpace& space() const { return space_; }
  const BackboneGeometry& geometry() const { return geometry_; }

  const ScoreParams& score_params() const { return score_params_; }
  void set_score_params(const ScoreParams& sp);

  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void set_rng(const Rng& rng) { rng_ = rng; }

  // Task registry.
  void register_task(const TaskInfo& info);
  bool has_task(const TaskId& task) const { return tasks_.count(task) != 0; }
  const TaskInfo& task(const TaskId& task) const;
  const std::map<TaskId, TaskInfo>& tasks() const { return tasks_; }

  // Layer store.
  bool has_block(BlockId id) const { return blocks_.count(id) != 0; }
  const LayerBlock& block(BlockId id) const;
  LayerBlock& mutable_block(BlockId id);
  const std::map<BlockId, LayerBlock>& blocks() const { return blocks_; }
  const std::set<ModelId>& users(BlockId id) const;

  BlockId allocate_block_id() { return next_block_id_++; }
  ModelId allocate_model_id() { return next_model_id_++; }
  BlockId next_block_id() const { return next_block_id_; }
  ModelId next_model_id() const { return next_model_id_; }
  void set_id_counters(BlockId next_block, ModelId next_model);

  // Models, ordered by id (creation order).
  bool has_model(ModelId id) const { return models_.count(id) != 0; }
  const ModelSpec& model(ModelId id) const;
  ModelSpec& mutable_model(ModelId id);
  const std::map<ModelId, ModelSpec>& models() const { return models_; }
  std::vector<ModelId> models_for_task(const TaskId& task) const;

  /// Inserts model plus the blocks it owns exclusively. Trainable references
  /// must point at blocks no other model uses; heads are never shared.
  void commit_model(ModelSpec model, std::vector<LayerBlock> fresh_blocks = {});
  /// Removes the model and garbage-collects blocks left unreferenced.
  void discard_model(ModelId id);

  /// Number of committed models of tasks other than task referencing the block.
  int sharing_count(BlockId id, const TaskId& task) const;

  int selection_count(ModelId model, const TaskId& task) const;
  void increment_selection(ModelId model, const TaskId& task);
  const std::map<std::pair<ModelId, TaskId>, int>& selection_counts() const { return selection_counts_; }
  void set_selection_count(ModelId model, const TaskId& task, int count);

  int generation() const { return generation_; }
  void set_generation(int g) { generation_ = g; }
  int advance_generation() { return ++generation_; }

 private:
  void check_structure(const ModelSpec& model) const;

  SearchSpace space_;
  BackboneGeometry geometry_;
  ScoreParams score_params_;
  Rng rng_;
  std::map<TaskId, TaskInfo> tasks_;
  std::map<BlockId, LayerBlock> blocks_;
  std::map<BlockId, std::set<ModelId>> users_;
  std::map<ModelId, ModelSpec> models_;
  std::map<std::pair<ModelId, TaskId>, int> selection_counts_;
  BlockId next_block_id_ = 1;
  ModelId next_model_id_ = 1;
  int generation_ = 0;
};

/// Each block contributes size / (number of other-task models using it + 1).
double accounted_params(const SystemState& system, const ModelSpec& model);

std::int64_t dense_flops(int d_in, int d_out);
/// Inference flops for one sample: every dense map costs 2*d_in*d_out + d_out;
/// the patch embedding is applied once per patch at the model's resolution.
std::int64_t inference_flops(const SystemState& system, const ModelSpec& model);

int model_resolution(const SystemState& system, const ModelSpec& model);

/// Current score of a committed model under the system's score parameters.
double model_score(const SystemState& system, const ModelSpec& model);

/// Seeds the system with the root model (random-initialized embedding,
/// root_depth hidden blocks and a head) under the reserved root task.
ModelId seed_root_model(SystemState& system);

/// Graphviz description: one triangle input node and one box head node per
/// model, an ellipse per shared block colored by creating task, and one edge
/// chain per model from input to head.
std::string export_dot(const SystemState& system);

}  // namespace evomt

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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evomt/dataset.hpp"
#include "evomt/mutation.hpp"
#include "evomt/system_graph.hpp"
#include "evomt/trainer.hpp"

namespace evomt {

struct EvolutionConfig {
  int generations = 4;
  int children_per_generation = 4;
  int train_cycles = 4;
  TrainBudget budget;
  Mode mode = Mode::kMuNetPlus;
  // Fine-tune-top-layers baseline: when set, every child gets the head plus
  // clones of exactly the top k non-head layers and no other mutation.
  std::optional<int> finetune_top_k;

  void validate() const;
  MutationFlags flags() const { return MutationFlags::for_mode(mode); }

  friend bool operator==(const EvolutionConfig&, const EvolutionConfig&) = default;
};

struct TaskRow {
  TaskId task;
  ModelId model = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double accounted_params = 0.0;
  std::int64_t flops = 0;
  int hidden_depth = 0;
  int resolution = 0;
};

/// System-level reference metrics: accuracy over a task subset, costs over
/// every model in the system.
struct MetricsSnapshot {
  std::uint64_t index = 0;
  std::string segment;
  TaskId task;  // task whose iteration produced the snapshot; empty otherwise
  double mean_test_accuracy = 0.0;
  double mean_val_accuracy = 0.0;
  double mean_accounted_params = 0.0;
  double mean_flops = 0.0;
  std::size_t num_models = 0;
  std::vector<TaskRow> rows;
};

struct LineageEvent {
  ModelId child = 0;
  ModelId parent = 0;
  TaskId task;
  int generation = 0;
  std::vector<std::string> mutations;
  double quality = 0.0;
  double score = 0.0;
  bool retained = false;
  std::string error;
};

struct SegmentSpec {
  std::string label;
  std::vector<TaskId> tasks;
  int iterations = 0;
  std::optional<Mode> mode;
  std::optional<double> s;
  std::optional<double> recalibrate;
  std::optional<int> generations;
  std::optional<int> children;
  std::optional<int> cycles;
  std::optional<std::int64_t> samples_cap;
  std::vector<std::string> add_task_dirs;
};

/// Records: `segment <label>`, `mode <munet|munet_plus>`, `s <real>`,
/// `recalibrate <multiplier>`, `tasks <a,b,...>`, `iterations <n>`,
/// `generations <n>`, `children <n>`, `cycles <n>`, `samples_cap <n>`,
/// `add_tasks <dir>`. '#' starts a comment.
std::vector<SegmentSpec> parse_segments(std::string_view text);
std::vector<SegmentSpec> load_segments(const std::filesystem::path& path);

struct Progress {
  std::string segments_digest;
  std::size_t segment = 0;
  std::size_t step = 0;
  bool overrides_applied = false;

  friend bool operator==(const Progress&, const Progress&) = default;
};

/// Everything a checkpoint captures: the system plus the evolution settings,
/// metric history, lineage log and the segment cursor.
struct RunState {
  SystemState system;
  EvolutionConfig config;
  std::vector<MetricsSnapshot> history;
  std::vector<LineageEvent> lineage;
  Progress progress;
};

/// Exact acceptance probability 0.5^k for a candidate selected k times.
double acceptance_probability(int selections);

/// Candidates: the active population by descending score (ties to the older
/// model), then every other model in shuffled order; each is accepted with
/// probability 0.5^selections(candidate, task). Falls back to a uniform draw.
/// The chosen model's selection count for task is incremented.
ModelId sample_parent(SystemState& system, const TaskId& task, Rng& rng);

/// Active population of task ordered by descending current score.
std::vector<ModelId> ranked_population(const SystemState& system, const TaskId& task);

void run_generation(RunState& run, DatasetCache& data, const TaskId& task);

/// One active task iteration: generations of child sampling and training,
/// then every model of task except the best-scoring one is removed.
void run_task_iteration(RunState& run, DatasetCache& data, const TaskId& task);

MetricsSnapshot metrics_snapshot(const SystemState& system, DatasetCache& data,
                                 const std::vector<TaskId>& task_subset);

void apply_segment_overrides(RunState& run, const SegmentSpec& segment);

/// Runs the segment's overrides and iterations round-robin over its task
/// list, appending a snapshot to run.history after every task iteration.
/// Returns the snapshots produced.
std::vector<MetricsSnapshot> run_segment(RunState& run, DatasetCache& data, const SegmentSpec& segment);

/// Runs a list of segments, resuming from run.progress when it refers to the
/// same segment list. on_step is called after overrides and after every task
/// iteration, which is where callers checkpoint.
void run_segments(RunState& run, DatasetCache& data, const std::vector<SegmentSpec>& segments,
                  const std::string& segments_digest, const std::function<void(const RunState&)>& on_step = {});

}  // namespace evomt

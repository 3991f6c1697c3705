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

// Shared fixtures for the unit and acceptance tests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "evomt/checkpoint.hpp"
#include "evomt/evolution.hpp"
#include "evomt/synthetic.hpp"

namespace evomt::testing {

inline std::filesystem::path spaces_dir() { return EVOMT_SPACES_DIR; }

inline SearchSpace desk_space() { return SearchSpace::load(spaces_dir() / "desk.axes"); }

/// Small geometry so systems stay cheap: 8x8 images, 4x4 patches.
inline BackboneGeometry tiny_geometry(int depth = 2) {
  BackboneGeometry g;
  g.width = 8;
  g.root_depth = depth;
  g.root_classes = 3;
  return g;
}

inline TaskInfo task_info(const std::string& name, int classes = 3, int side = 16) {
  return {name, "", classes, side, side, 3};
}

/// A fresh system holding the root model and the given tasks.
inline SystemState make_system(const std::vector<std::string>& tasks, std::uint64_t seed = 7, int depth = 2,
                               int classes = 3) {
  SystemState sys(desk_space(), tiny_geometry(depth), seed);
  for (const auto& t : tasks) sys.register_task(task_info(t, classes));
  seed_root_model(sys);
  return sys;
}

/// Commits a child of parent for task built from the given actions.
inline ModelId add_child(SystemState& sys, ModelId parent, const TaskId& task,
                         const std::vector<MutationAction>& actions, Rng& rng,
                         Mode mode = Mode::kMuNetPlus) {
  std::vector<MutationAction> all{MutationAction::make_trainable_head()};
  all.insert(all.end(), actions.begin(), actions.end());
  ChildDraft d = apply_mutations(sys, sys.model(parent), task, all, MutationFlags::for_mode(mode), rng);
  const ModelId id = d.model.id;
  sys.commit_model(std::move(d.model), std::move(d.fresh_blocks));
  return id;
}

/// Four easy 16x16 tasks in two related pairs.
inline SyntheticSpec four_task_spec(int train = 256, int val = 96, int test = 96) {
  SyntheticSpec s;
  s.height = s.width = 16;
  s.channels = 3;
  s.tile = 4;
  s.noise = 0.15;
  s.tasks = {{"a1", 4, train, val, test}, {"a2", 4, train, val, test},
             {"b1", 4, train, val, test}, {"b2", 4, train, val, test}};
  s.relations = {{"a1", "a2", 0.5}, {"b1", "b2", 0.5}};
  return s;
}

/// Run state over in-memory synthetic datasets placed into data.
inline RunState make_run(const SyntheticSpec& spec, std::uint64_t seed, DatasetCache& data,
                         BackboneGeometry geometry = tiny_geometry(2)) {
  RunState run;
  run.system = SystemState(desk_space(), geometry, seed);
  for (auto& d : generate_synthetic_tasks(spec, seed)) {
    run.system.register_task(d.info);
    data.insert(std::move(d));
  }
  seed_root_model(run.system);
  run.system.set_score_params(calibrate(run.system, 1.0));
  return run;
}

inline EvolutionConfig small_config() {
  EvolutionConfig cfg;
  cfg.generations = 1;
  cfg.children_per_generation = 2;
  cfg.train_cycles = 1;
  cfg.budget.samples_cap = 128;
  cfg.budget.batch_size = 32;
  return cfg;
}

/// Every block referenced by a model exists and every stored block is used.
inline bool references_consistent(const SystemState& sys) {
  std::set<BlockId> used;
  for (const auto& [id, m] : sys.models())
    for (const auto& ref : m.layers) {
      if (!sys.has_block(ref.block)) return false;
      used.insert(ref.block);
    }
  for (const auto& [id, b] : sys.blocks())
    if (!used.count(id)) return false;
  return true;
}

/// Per-parameter recount of the accounted cost: walks every parameter of
/// every referenced block and, for each, scans all models for other-task
/// users. Integer tallies per divisor keep the reduction exact.
inline double brute_force_accounted(const SystemState& sys, ModelId model_id) {
  const ModelSpec& m = sys.model(model_id);
  std::map<int, std::int64_t> tally;
  for (const auto& ref : m.layers) {
    const LayerBlock& b = sys.block(ref.block);
    for (std::size_t p = 0; p < b.params.size(); ++p) {
      int users = 1;
      for (const auto& [oid, other] : sys.models()) {
        if (oid == model_id || other.task == m.task) continue;
        for (const auto& oref : other.layers)
          if (oref.block == b.id) {
            ++users;
            break;
          }
      }
      ++tally[users];
    }
  }
  double total = 0.0;
  for (const auto& [d, n] : tally) total += static_cast<double>(n) / d;
  return total;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("evomt_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace evomt::testing

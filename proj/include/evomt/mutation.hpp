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

#include <string>
#include <string_view>
#include <vector>

#include "evomt/model.hpp"
#include "evomt/rng.hpp"
#include "evomt/system_graph.hpp"

namespace evomt {

enum class MutationType { kCloneLayer, kRemoveTopLayer, kHparamChange, kMakeTrainableHead };

struct MutationAction {
  MutationType type = MutationType::kMakeTrainableHead;
  int depth = -1;    // kCloneLayer: 0 is the embedding, 1.. the hidden blocks
  std::string axis;  // kHparamChange

  static MutationAction clone_layer(int depth) { return {MutationType::kCloneLayer, depth, {}}; }
  static MutationAction remove_top_layer() { return {MutationType::kRemoveTopLayer, -1, {}}; }
  static MutationAction hparam_change(std::string axis) {
    return {MutationType::kHparamChange, -1, std::move(axis)};
  }
  static MutationAction make_trainable_head() { return {MutationType::kMakeTrainableHead, -1, {}}; }

  // Stable text key, e.g. "clone:2", "remove_top", "hparam:momentum", "head".
  std::string key() const;
  static MutationAction from_key(std::string_view key);
  // "clone", "remove_top", "hparam:<axis>" or "head".
  std::string family() const;

  friend bool operator==(const MutationAction&, const MutationAction&) = default;
};

enum class Mode { kMuNet, kMuNetPlus };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct MutationFlags {
  bool allow_remove = true;
  bool resolution_mutable = true;
  int min_depth = 1;

  static MutationFlags for_mode(Mode mode);
};

/// Candidate actions for a parent: one clone per non-head layer, top-layer
/// removal above the depth floor, one change per hyperparameter axis.
/// The always-applied head action is not listed.
std::vector<MutationAction> possible_mutations(const SearchSpace& space, const ModelSpec& model,
                                               const MutationFlags& flags);

/// Always contains the head action; every other candidate is included
/// independently with the parent's probability for it.
std::vector<MutationAction> sample_mutations(const ModelSpec& parent,
                                             const std::vector<MutationAction>& candidates, Rng& rng);

/// A materialized child that has not been committed: its spec plus the
/// fresh blocks it owns (clones and the head).
struct ChildDraft {
  ModelSpec model;
  std::vector<LayerBlock> fresh_blocks;
};

ChildDraft apply_mutations(SystemState& system, const ModelSpec& parent, const TaskId& child_task,
                           const std::vector<MutationAction>& actions, const MutationFlags& flags, Rng& rng);

/// Probability table for a child: entries for exactly child_actions, taken
/// from the parent (or the initial 0.2), each stepping to a grid neighbour
/// with probability equal to its own value.
MuTable inherit_mu(const MuTable& parent_mu, const std::vector<MutationAction>& child_actions, Rng& rng);

double mu_probability(const MuTable& mu, const MutationAction& action);

}  // namespace evomt

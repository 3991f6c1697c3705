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

#include "evomt/mutation.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "evomt/error.hpp"

namespace evomt {

std::string MutationAction::key() const {
  switch (type) {
    case MutationType::kCloneLayer: return "clone:" + std::to_string(depth);
    case MutationType::kRemoveTopLayer: return "remove_top";
    case MutationType::kHparamChange: return "hparam:" + axis;
    case MutationType::kMakeTrainableHead: return "head";
  }
  return "head";
}

std::string MutationAction::family() const {
  if (type == MutationType::kCloneLayer) return "clone";
  return key();
}

MutationAction MutationAction::from_key(std::string_view key) {
  if (key == "remove_top") return remove_top_layer();
  if (key == "head") return make_trainable_head();
  if (key.starts_with("hparam:") && key.size() > 7) return hparam_change(std::string(key.substr(7)));
  if (key.starts_with("clone:")) {
    int depth = -1;
    auto digits = key.substr(6);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), depth);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && depth >= 0) return clone_layer(depth);
  }
  throw Error(Errc::kParse, "unknown mutation action '" + std::string(key) + "'");
}

std::string_view to_string(Mode mode) { return mode == Mode::kMuNet ? "munet" : "munet_plus"; }

Mode mode_from_string(std::string_view s) {
  if (s == "munet") return Mode::kMuNet;
  if (s == "munet_plus") return Mode::kMuNetPlus;
  throw Error(Errc::kParse, "unknown mode '" + std::string(s) + "'");
}

MutationFlags MutationFlags::for_mode(Mode mode) {
  MutationFlags f;
  f.allow_remove = mode == Mode::kMuNetPlus;
  f.resolution_mutable = mode == Mode::kMuNetPlus;
  return f;
}

std::vector<MutationAction> possible_mutations(const SearchSpace& space, const ModelSpec& model,
                                               const MutationFlags& flags) {
  std::vector<MutationAction> out;
  const int depth = model.hidden_depth();
  for (int i = 0; i <= depth; ++i) out.push_back(MutationAction::clone_layer(i));
  if (flags.allow_remove && depth > flags.min_depth) out.push_back(MutationAction::remove_top_layer());
  for (const auto& a : space.axes()) {
    if (a.name == axes::kResolution && !flags.resolution_mutable) continue;
    out.push_back(MutationAction::hparam_change(a.name));
  }
  return out;
}

double mu_probability(const MuTable& mu, const MutationAction& action) {
  auto it = mu.find(action.key());
  return MuGrid::value(it == mu.end() ? MuGrid::kInitStep : it->second);
}

std::vector<MutationAction> sample_mutations(const ModelSpec& parent,
                                             const std::vector<MutationAction>& candidates, Rng& rng) {
  std::vector<MutationAction> out{MutationAction::make_trainable_head()};
  for (const auto& c : candidates)
    if (mu_probability(parent.mu, c) > rng.uniform()) out.push_back(c);
  return out;
}

MuTable inherit_mu(const MuTable& parent_mu, const std::vector<MutationAction>& child_actions, Rng& rng) {
  MuTable out;
  for (const auto& a : child_actions) {
    auto it = parent_mu.find(a.key());
    int step = it == parent_mu.end() ? MuGrid::kInitStep : it->second;
    if (!MuGrid::on_grid(step)) throw Error(Errc::kInvalidValue, "inherited probability off grid for " + a.key());
    if (rng.uniform() < MuGrid::value(step)) step = step_mu(step, rng);
    out[a.key()] = step;
  }
  return out;
}

ChildDraft apply_mutations(SystemState& system, const ModelSpec& parent, const TaskId& child_task,
                           const std::vector<MutationAction>& actions, const MutationFlags& flags, Rng& rng) {
  const auto possible = possible_mutations(system.space(), parent, flags);
  std::set<std::string> seen;
  std::set<int> clones;
  bool remove_top = false;
  std::vector<std::string> hparam_axes;
  for (const auto& a : actions) {
    if (!seen.insert(a.key()).second) throw Error(Errc::kInvalidValue, "duplicate mutation " + a.key());
    if (a.type == MutationType::kMakeTrainableHead) continue;
    if (std::find(possible.begin(), possible.end(), a) == possible.end())
      throw Error(Errc::kInvalidValue, "mutation " + a.key() + " is not applicable to model " +
                                           std::to_string(parent.id));
    if (a.type == MutationType::kCloneLayer) clones.insert(a.depth);
    if (a.type == MutationType::kRemoveTopLayer) remove_top = true;
    if (a.type == MutationType::kHparamChange) hparam_axes.push_back(a.axis);
  }

  const TaskInfo& task = system.task(child_task);
  ChildDraft draft;
  ModelSpec& child = draft.model;
  child.id = system.allocate_model_id();
  child.task = child_task;
  child.parent = parent.id;
  child.hparams = parent.hparams;
  for (const auto& a : actions) child.mutations.push_back(a.key());

  auto fresh_copy = [&](const LayerBlock& src) {
    LayerBlock b = src;
    b.id = system.allocate_block_id();
    b.created_by_task = child_task;
    b.generation_tag = system.generation();
    return b;
  };

  // Clone indices refer to the parent's ordering; removal applies afterwards.
  const std::size_t body = parent.layers.size() - 1;
  for (std::size_t i = 0; i < body; ++i) {
    const BlockId src = parent.layers[i].block;
    if (clones.count(static_cast<int>(i))) {
      draft.fresh_blocks.push_back(fresh_copy(system.block(src)));
      child.layers.push_back({draft.fresh_blocks.back().id, true});
    } else {
      child.layers.push_back({src, false});
    }
  }
  if (remove_top) {
    if (child.layers.back().trainable) draft.fresh_blocks.pop_back();
    child.layers.pop_back();
  }

  const LayerBlock& parent_head = system.block(parent.head().block);
  LayerBlock head;
  if (parent.task == child_task && parent_head.d_out == task.num_classes) {
    head = fresh_copy(parent_head);
  } else {
    head = LayerBlock::zeros(LayerKind::kHead, system.geometry().width, task.num_classes);
    head.id = system.allocate_block_id();
    head.created_by_task = child_task;
    head.generation_tag = system.generation();
  }
  draft.fresh_blocks.push_back(std::move(head));
  child.layers.push_back({draft.fresh_blocks.back().id, true});

  for (const auto& name : hparam_axes) {
    std::size_t ai = system.space().axis_index(name);
    child.hparams.index[ai] = step_index(system.space().axes()[ai], child.hparams.index[ai], rng);
  }
  child.mu = inherit_mu(parent.mu, possible_mutations(system.space(), child, flags), rng);
  return draft;
}

}  // namespace evomt

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
#include <span>
#include <vector>

#include "evomt/backbone.hpp"
#include "evomt/dataset.hpp"
#include "evomt/preprocess.hpp"
#include "evomt/rng.hpp"
#include "evomt/system_graph.hpp"

namespace evomt {

struct TrainBudget {
  std::int64_t samples_cap = 51200;
  int batch_size = 32;

  void validate() const;
  friend bool operator==(const TrainBudget&, const TrainBudget&) = default;
};

/// Linear warmup over ceil(warmup_ratio * total_steps) steps, then cosine
/// decay reaching 0 at total_steps.
double lr_at(std::int64_t step, std::int64_t total_steps, double peak_lr, double warmup_ratio);

/// v <- momentum * v + g; the update is lr * v, or lr * (momentum * g + v) with
/// Nesterov.
void sgd_step(std::span<float> params, std::span<float> velocity, std::span<const float> grads, double lr,
              double momentum, bool nesterov);

template <typename Scalar>
LayerStack<Scalar> gather_stack(const SystemState& system, const ModelSpec& model) {
  LayerStack<Scalar> stack;
  stack.reserve(model.layers.size());
  for (const auto& ref : model.layers) stack.push_back(unpack_layer<Scalar>(system.block(ref.block)));
  return stack;
}

/// Appends the non-overlapping patch columns of img to the batch.
template <typename Scalar>
PatchBatch<Scalar> make_patch_batch(std::span<const Image> images, int patch) {
  PatchBatch<Scalar> batch;
  if (images.empty()) throw Error(Errc::kShapeMismatch, "empty batch");
  const Image& first = images.front();
  if (first.height % patch || first.width % patch)
    throw Error(Errc::kShapeMismatch, "image size is not a multiple of the patch size");
  const int gy = first.height / patch, gx = first.width / patch;
  const int c = first.channels;
  batch.patches_per_sample = gy * gx;
  batch.batch = static_cast<int>(images.size());
  batch.patches.resize(static_cast<Eigen::Index>(patch) * patch * c,
                       static_cast<Eigen::Index>(batch.patches_per_sample) * batch.batch);
  Eigen::Index col = 0;
  for (const Image& img : images) {
    if (img.height != first.height || img.width != first.width || img.channels != c)
      throw Error(Errc::kShapeMismatch, "images in a batch must share dimensions");
    for (int py = 0; py < gy; ++py)
      for (int px = 0; px < gx; ++px, ++col) {
        Eigen::Index row = 0;
        for (int dy = 0; dy < patch; ++dy)
          for (int dx = 0; dx < patch; ++dx)
            for (int ch = 0; ch < c; ++ch) batch.patches(row++, col) = img.at(py * patch + dy, px * patch + dx, ch);
      }
  }
  return batch;
}

/// Exact gradients of the mean cross-entropy with respect to the model's
/// trainable blocks, keyed by block id. Frozen blocks get no entry.
template <typename Scalar>
std::map<BlockId, std::vector<Scalar>> gradients(const SystemState& system, const ModelSpec& model,
                                                 const PatchBatch<Scalar>& batch, std::span<const int> labels) {
  const auto stack = gather_stack<Scalar>(system, model);
  std::vector<bool> want;
  for (const auto& ref : model.layers) want.push_back(ref.trainable);
  std::vector<DenseLayer<Scalar>> grads;
  loss_and_gradients(stack, batch, labels, want, grads);
  std::map<BlockId, std::vector<Scalar>> out;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (want[i]) out[model.layers[i].block] = flatten(grads[i]);
  return out;
}

struct CycleReport {
  std::int64_t samples = 0;
  std::int64_t steps = 0;
  double mean_loss = 0.0;
};

std::int64_t steps_per_cycle(std::size_t train_size, const TrainBudget& budget);

/// One pass over min(|train|, samples_cap) shuffled samples. The LR schedule
/// spans total_cycles cycles, so consecutive cycles form one schedule. Only
/// the model's trainable blocks change.
CycleReport train_cycle(SystemState& system, ModelId model, const TaskDataset& data, const TrainBudget& budget,
                        int cycle_index, int total_cycles, Rng& rng);

/// Trains every block of the root model on a generic dataset, standing in for
/// a pretrained checkpoint. Must run before any task model exists, and the
/// root head must match the dataset's class count. Cycle c uses the c-th
/// resolution value (cyclically) so frozen features serve every resolution a
/// child may pick. Momentum buffers are cleared afterwards.
std::vector<CycleReport> pretrain_root(SystemState& system, const TaskDataset& data, int cycles,
                                       const TrainBudget& budget);

/// Top-1 accuracy with evaluation preprocessing; ties pick the lowest class.
double evaluate(const SystemState& system, const ModelSpec& model, const Split& split);

/// Logits for split samples [begin, end), evaluation preprocessing.
MatrixX<float> predict(const SystemState& system, const ModelSpec& model, const Split& split, std::size_t begin,
                       std::size_t end);

}  // namespace evomt

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

#include "evomt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "evomt/error.hpp"

namespace evomt {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kEvalChunk = 256;

PreprocessSettings settings_for(const SystemState& system, const ModelSpec& model, const Split& split) {
  return PreprocessSettings::from(system.space(), model.hparams, split.height);
}

}  // namespace

void TrainBudget::validate() const {
  if (samples_cap <= 0 || batch_size <= 0) throw Error(Errc::kInvalidValue, "training budget must be positive");
}

double lr_at(std::int64_t step, std::int64_t total_steps, double peak_lr, double warmup_ratio) {
  if (total_steps <= 0 || step >= total_steps) return 0.0;
  const auto warm = static_cast<std::int64_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps) - 1e-9));
  if (step < warm) return peak_lr * static_cast<double>(step) / static_cast<double>(warm);
  const double progress = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return peak_lr * 0.5 * (1.0 + std::cos(kPi * progress));
}

void sgd_step(std::span<float> params, std::span<float> velocity, std::span<const float> grads, double lr,
              double momentum, bool nesterov) {
  if (params.size() != velocity.size() || params.size() != grads.size())
    throw Error(Errc::kShapeMismatch, "optimizer buffers are not congruent");
  const float m = static_cast<float>(momentum);
  const float rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = m * velocity[i] + grads[i];
    const float update = nesterov ? m * grads[i] + velocity[i] : velocity[i];
    params[i] -= rate * update;
  }
}

std::int64_t steps_per_cycle(std::size_t train_size, const TrainBudget& budget) {
  const auto n = std::min<std::int64_t>(static_cast<std::int64_t>(train_size), budget.samples_cap);
  return (n + budget.batch_size - 1) / budget.batch_size;
}

CycleReport train_cycle(SystemState& system, ModelId model_id, const TaskDataset& data, const TrainBudget& budget,
                        int cycle_index, int total_cycles, Rng& rng) {
  budget.validate();
  if (data.train.size() == 0) throw Error(Errc::kInvalidValue, "task " + data.info.name + " has no training data");
  if (cycle_index < 0 || cycle_index >= total_cycles) throw Error(Errc::kInvalidValue, "cycle index out of range");
  ModelSpec& model = system.mutable_model(model_id);
  const auto& space = system.space();
  const double peak = space.value(model.hparams, axes::kLearningRate);
  const double warmup = space.value(model.hparams, axes::kWarmupRatio);
  const double momentum = space.value(model.hparams, axes::kMomentum);
  const bool nesterov = space.value(model.hparams, axes::kNesterov) != 0.0;
  const PreprocessSettings settings = settings_for(system, model, data.train);
  const int patch = system.geometry().patch;

  const std::int64_t n = std::min<std::int64_t>(static_cast<std::int64_t>(data.train.size()), budget.samples_cap);
  const std::int64_t spc = steps_per_cycle(data.train.size(), budget);
  const std::int64_t total_steps = spc * total_cycles;

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  LayerStack<float> stack = gather_stack<float>(system, model);
  std::vector<bool> want;
  for (const auto& ref : model.layers) want.push_back(ref.trainable);

  CycleReport report;
  double loss_sum = 0.0;
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<DenseLayer<float>> grads;
  for (std::int64_t step = 0; step < spc; ++step) {
    const std::int64_t begin = step * budget.batch_size;
    const std::int64_t end = std::min<std::int64_t>(n, begin + budget.batch_size);
    images.clear();
    labels.clear();
    for (std::int64_t i = begin; i < end; ++i) {
      const std::size_t s = order[static_cast<std::size_t>(i)];
      images.push_back(preprocess(data.train.image(s), data.train.height, data.train.width, data.train.channels,
                                  settings, &rng, true));
      labels.push_back(data.train.labels[s]);
    }
    const auto batch = make_patch_batch<float>(images, patch);
    const float loss = loss_and_gradients(stack, batch, labels, want, grads);
    loss_sum += static_cast<double>(loss) * static_cast<double>(end - begin);
    const double lr = lr_at(cycle_index * spc + step, total_steps, peak, warmup);
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
      if (!want[li]) continue;
      LayerBlock& block = system.mutable_block(model.layers[li].block);
      const std::vector<float> flat = flatten(grads[li]);
      sgd_step(block.params, block.opt_state, flat, lr, momentum, nesterov);
      stack[li] = unpack_layer<float>(block);
    }
    report.samples += end - begin;
    ++report.steps;
  }
  model.train_steps += static_cast<std::uint64_t>(report.steps);
  report.mean_loss = report.samples ? loss_sum / static_cast<double>(report.samples) : 0.0;
  return report;
}

std::vector<CycleReport> pretrain_root(SystemState& system, const TaskDataset& data, int cycles,
                                       const TrainBudget& budget) {
  if (cycles <= 0) throw Error(Errc::kInvalidValue, "pretraining needs at least one cycle");
  if (system.models().size() != 1 || system.models().begin()->second.task != kRootTask)
    throw Error(Errc::kState, "pretraining requires a system holding only the root model");
  const ModelId root_id = system.models().begin()->first;
  ModelSpec& root = system.mutable_model(root_id);
  const int classes = system.block(root.head().block).d_out;
  if (classes != data.info.num_classes)
    throw Error(Errc::kShapeMismatch, "root head has " + std::to_string(classes) + " classes but " + data.info.name +
                                          " has " + std::to_string(data.info.num_classes));

  const HparamConfig original = root.hparams;
  std::optional<std::size_t> res_axis;
  for (std::size_t i = 0; i < system.space().axes().size(); ++i)
    if (system.space().axes()[i].name == axes::kResolution) res_axis = i;

  for (auto& ref : root.layers) ref.trainable = true;
  Rng rng = system.rng().derive("root-pretrain");
  std::vector<CycleReport> reports;
  for (int c = 0; c < cycles; ++c) {
    if (res_axis) {
      const std::size_t n = system.space().axes()[*res_axis].values.size();
      system.mutable_model(root_id).hparams.index[*res_axis] = static_cast<std::size_t>(c) % n;
    }
    reports.push_back(train_cycle(system, root_id, data, budget, c, cycles, rng));
  }
  ModelSpec& done = system.mutable_model(root_id);
  done.hparams = original;
  for (auto& ref : done.layers) {
    ref.trainable = false;
    auto& state = system.mutable_block(ref.block).opt_state;
    std::fill(state.begin(), state.end(), 0.0f);
  }
  return reports;
}

MatrixX<float> predict(const SystemState& system, const ModelSpec& model, const Split& split, std::size_t begin,
                       std::size_t end) {
  const PreprocessSettings settings = settings_for(system, model, split);
  const auto stack = gather_stack<float>(system, model);
  std::vector<Image> images;
  for (std::size_t i = begin; i < end; ++i)
    images.push_back(preprocess(split.image(i), split.height, split.width, split.channels, settings, nullptr, false));
  return forward(stack, make_patch_batch<float>(images, system.geometry().patch));
}

double evaluate(const SystemState& system, const ModelSpec& model, const Split& split) {
  if (split.size() == 0) throw Error(Errc::kInvalidValue, "cannot evaluate on an empty split");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < split.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(split.size(), begin + kEvalChunk);
    const MatrixX<float> logits = predict(system, model, split, begin, end);
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < logits.rows(); ++k)
        if (logits(k, b) > logits(best, b)) best = k;
      if (best == split.labels[begin + static_cast<std::size_t>(b)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace evomt

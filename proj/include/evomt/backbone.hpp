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

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evomt/error.hpp"
#include "evomt/model.hpp"

namespace evomt {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  LayerKind kind = LayerKind::kHidden;
  MatrixX<Scalar> weight;  // d_out x d_in
  VectorX<Scalar> bias;
};

template <typename Scalar>
using LayerStack = std::vector<DenseLayer<Scalar>>;

template <typename Scalar>
DenseLayer<Scalar> unpack_layer(const LayerBlock& block) {
  DenseLayer<Scalar> layer;
  layer.kind = block.kind;
  const std::size_t nw = static_cast<std::size_t>(block.d_in) * block.d_out;
  layer.weight = Eigen::Map<const MatrixX<float>>(block.params.data(), block.d_out, block.d_in).cast<Scalar>();
  layer.bias = Eigen::Map<const VectorX<float>>(block.params.data() + nw, block.d_out).cast<Scalar>();
  return layer;
}

// Flattens in the block storage order: weights column-major, then bias.
template <typename Scalar>
std::vector<Scalar> flatten(const DenseLayer<Scalar>& layer) {
  std::vector<Scalar> out(static_cast<std::size_t>(layer.weight.size() + layer.bias.size()));
  std::copy(layer.weight.data(), layer.weight.data() + layer.weight.size(), out.begin());
  std::copy(layer.bias.data(), layer.bias.data() + layer.bias.size(), out.begin() + layer.weight.size());
  return out;
}

/// Patches of a batch laid out as columns: sample b owns columns
/// [b * patches_per_sample, (b + 1) * patches_per_sample).
template <typename Scalar>
struct PatchBatch {
  MatrixX<Scalar> patches;
  int patches_per_sample = 0;
  int batch = 0;
};

template <typename Scalar>
struct ForwardCache {
  MatrixX<Scalar> embed_act;               // tanh of per-patch embedding
  std::vector<MatrixX<Scalar>> hidden;    // h_0 .. h_L, each width x batch
  std::vector<MatrixX<Scalar>> block_act;  // tanh output of each hidden block
};

template <typename Scalar>
void check_stack(const LayerStack<Scalar>& stack, const PatchBatch<Scalar>& batch) {
  if (stack.size() < 2 || stack.front().kind != LayerKind::kEmbedding || stack.back().kind != LayerKind::kHead)
    throw Error(Errc::kShapeMismatch, "layer stack must start with an embedding and end with a head");
  if (stack.front().weight.cols() != batch.patches.rows())
    throw Error(Errc::kShapeMismatch, "patch width does not match the embedding input");
  if (batch.patches.cols() != static_cast<Eigen::Index>(batch.patches_per_sample) * batch.batch)
    throw Error(Errc::kShapeMismatch, "patch matrix does not match batch geometry");
  for (std::size_t i = 1; i < stack.size(); ++i)
    if (stack[i].weight.cols() != stack[i - 1].weight.rows())
      throw Error(Errc::kShapeMismatch, "layer input width mismatch");
}

/// Patch embedding (dense + tanh, mean-pooled over patches), residual blocks
/// h <- h + tanh(W h + b), then the dense head. Returns logits, classes x batch.
template <typename Scalar>
MatrixX<Scalar> forward(const LayerStack<Scalar>& stack, const PatchBatch<Scalar>& batch,
                        ForwardCache<Scalar>* cache = nullptr) {
  check_stack(stack, batch);
  const auto& embed = stack.front();
  MatrixX<Scalar> act = ((embed.weight * batch.patches).colwise() + embed.bias).array().tanh().matrix();
  const int np = batch.patches_per_sample;
  MatrixX<Scalar> h(act.rows(), batch.batch);
  for (int b = 0; b < batch.batch; ++b) h.col(b) = act.middleCols(static_cast<Eigen::Index>(b) * np, np).rowwise().mean();
  if (cache) {
    cache->embed_act = std::move(act);
    cache->hidden.assign(1, h);
    cache->block_act.clear();
  }
  for (std::size_t i = 1; i + 1 < stack.size(); ++i) {
    MatrixX<Scalar> t = ((stack[i].weight * h).colwise() + stack[i].bias).array().tanh().matrix();
    h += t;
    if (cache) {
      cache->block_act.push_back(std::move(t));
      cache->hidden.push_back(h);
    }
  }
  return (stack.back().weight * h).colwise() + stack.back().bias;
}

/// Mean softmax cross-entropy over the batch columns.
template <typename Scalar>
Scalar cross_entropy(const MatrixX<Scalar>& logits, std::span<const int> labels) {
  Scalar total = 0;
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    Scalar m = logits.col(b).maxCoeff();
    Scalar lse = m + std::log((logits.col(b).array() - m).exp().sum());
    total += lse - logits(labels[static_cast<std::size_t>(b)], b);
  }
  return total / static_cast<Scalar>(logits.cols());
}

/// Loss and exact gradients of the mean cross-entropy. grads[i] is filled
/// only where want[i] is set; other entries are left empty.
template <typename Scalar>
Scalar loss_and_gradients(const LayerStack<Scalar>& stack, const PatchBatch<Scalar>& batch,
                          std::span<const int> labels, const std::vector<bool>& want,
                          std::vector<DenseLayer<Scalar>>& grads) {
  ForwardCache<Scalar> cache;
  MatrixX<Scalar> logits = forward(stack, batch, &cache);
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols())
    throw Error(Errc::kShapeMismatch, "label count does not match batch");
  const Scalar loss = cross_entropy(logits, labels);

  grads.assign(stack.size(), DenseLayer<Scalar>{});
  std::size_t lowest = stack.size();
  for (std::size_t i = 0; i < stack.size(); ++i)
    if (want[i]) {
      lowest = i;
      break;
    }
  if (lowest == stack.size()) return loss;

  const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch.batch);
  MatrixX<Scalar> d = logits;
  for (Eigen::Index b = 0; b < d.cols(); ++b) {
    Scalar m = d.col(b).maxCoeff();
    d.col(b) = (d.col(b).array() - m).exp().matrix();
    d.col(b) /= d.col(b).sum();
    d(labels[static_cast<std::size_t>(b)], b) -= Scalar(1);
  }
  d *= inv_batch;

  const std::size_t top = stack.size() - 1;
  if (want[top]) {
    grads[top].kind = LayerKind::kHead;
    grads[top].weight = d * cache.hidden.back().transpose();
    grads[top].bias = d.rowwise().sum();
  }
  if (lowest == top) return loss;
  MatrixX<Scalar> dh = stack[top].weight.transpose() * d;

  for (std::size_t i = top - 1; i >= 1 && i >= lowest; --i) {
    const MatrixX<Scalar>& t = cache.block_act[i - 1];
    MatrixX<Scalar> dz = (dh.array() * (Scalar(1) - t.array().square())).matrix();
    if (want[i]) {
      grads[i].kind = LayerKind::kHidden;
      grads[i].weight = dz * cache.hidden[i - 1].transpose();
      grads[i].bias = dz.rowwise().sum();
    }
    dh += stack[i].weight.transpose() * dz;
  }
  if (lowest == 0) {
    const int np = batch.patches_per_sample;
    const Scalar inv_np = Scalar(1) / static_cast<Scalar>(np);
    MatrixX<Scalar> dz(cache.embed_act.rows(), cache.embed_act.cols());
    for (int b = 0; b < batch.batch; ++b)
      dz.middleCols(static_cast<Eigen::Index>(b) * np, np) = (dh.col(b) * inv_np).replicate(1, np);
    dz.array() *= Scalar(1) - cache.embed_act.array().square();
    grads[0].kind = LayerKind::kEmbedding;
    grads[0].weight = dz * batch.patches.transpose();
    grads[0].bias = dz.rowwise().sum();
  }
  return loss;
}

}  // namespace evomt

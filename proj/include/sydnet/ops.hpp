/**
 * Copyright 2026 The sydnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SYDNET_OPS_HPP_
#define SYDNET_OPS_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include "sydnet/tensor.hpp"

namespace syd {

using Rng = std::mt19937_64;

/// Mixes `parts` into `base` (splitmix64 finaliser per step) so independent
/// streams can be keyed by epoch, sample index and so on.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

// ---------------------------------------------------------------------------
// Linear algebra and elementwise arithmetic
// ---------------------------------------------------------------------------

/// [m x k] * [k x n] -> [m x n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Binary elementwise ops broadcast with right-aligned shapes (numpy rules).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

// ---------------------------------------------------------------------------
// Shape manipulation and reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Collapses every axis from `start_axis` on into one.
template <typename T>
Tensor<T> flatten(const Tensor<T>& x, std::size_t start_axis = 1);
template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis, bool keepdim = false);
template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis, bool keepdim = false);
/// Max along `axis`; the gradient goes to the first maximal element.
template <typename T>
Tensor<T> max(const Tensor<T>& x, std::size_t axis, bool keepdim = false);
/// Sum of all elements as a rank-0 tensor.
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x);

/// Axis selector for global pooling over a [... x h x w x c] map.
enum class PoolOver {
  kSpatial,  ///< [... x h x w x c] -> [... x c]
  kChannel,  ///< [... x h x w x c] -> [... x h x w x 1]
};

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& f, PoolOver over);
template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& f, PoolOver over);

// ---------------------------------------------------------------------------
// Spatial ops (NHWC layout)
// ---------------------------------------------------------------------------

/// x [b x H x W x cin], w [k x k x cin x cout] -> [b x Ho x Wo x cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t pad);

/// Rectangle on an NHWC map, in cells.
struct Region {
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t h = 0;
  std::size_t w = 0;
};

/**
 * Crops `region` from every map in x [b x H x W x c] and bilinearly resizes it
 * to out_h x out_w. Half-pixel centres (align-corners false): output cell o
 * samples source coordinate (o + 0.5) * in / out - 0.5, clamped to the crop.
 */
template <typename T>
Tensor<T> bilinear_crop_resize(const Tensor<T>& x, const Region& region, std::size_t out_h,
                               std::size_t out_w);

// ---------------------------------------------------------------------------
// Normalization, regularization, loss
// ---------------------------------------------------------------------------

/// Learnable scale/shift plus running moments for one normalized axis (the last).
template <typename T>
struct BatchNorm {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.99;
  double eps = 1e-5;

  BatchNorm() = default;
  BatchNorm(std::size_t channels, double momentum_ = 0.99, double eps_ = 1e-5);
  std::size_t channels() const { return gamma.numel(); }
};

/**
 * Training: normalizes with biased batch moments taken over every axis but
 * the last and folds them into the running moments
 * (running = momentum * running + (1 - momentum) * batch).
 * Eval: normalizes with the running moments.
 */
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNorm<T>& bn, bool training);

/// sqrt(rho / (1 - rho)); throws ParameterError unless 0 <= rho < 1.
double gaussian_noise_std(double rho);

/// Multiplies by Normal(1, sigma(rho)^2) noise in training; identity in eval.
template <typename T>
Tensor<T> gaussian_dropout(const Tensor<T>& x, double rho, bool training, Rng& rng);

/// Inverted Bernoulli dropout with drop rate `rate`; identity in eval.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng);

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over the batch of -log(max(p[label], 1e-12)); probs is [b x L].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& probs, std::span<const int> labels);

}  // namespace syd

#endif  // SYDNET_OPS_HPP_

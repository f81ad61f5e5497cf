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
#ifndef SYDNET_ATTENTION_HPP_
#define SYDNET_ATTENTION_HPP_

#include <cstddef>
#include <string>

#include "sydnet/ops.hpp"
#include "sydnet/optim.hpp"
#include "sydnet/patches.hpp"

namespace syd {

enum class HeadKind {
  kPbA,                ///< patches + channel/spatial attention + residual fusion
  kGap,                ///< GAP(F) -> regularizer -> softmax
  kAttentionBaseline,  ///< channel attention over the cells of F, no patches
};

enum class SpatialActivation { kSoftmax, kSigmoid };
enum class DropoutKind { kGaussian, kStandard, kNone };

std::string to_string(HeadKind kind);
std::string to_string(SpatialActivation act);
std::string to_string(DropoutKind kind);

struct HeadConfig {
  HeadKind kind = HeadKind::kPbA;
  std::size_t n = 1;  ///< patches (PbA) or feature-map cells (attention baseline)
  std::size_t h = 1;  ///< backbone map height, also the pooled patch height
  std::size_t w = 1;
  std::size_t c = 1;
  std::size_t c_a = 0;  ///< attention width; 0 selects max(c / 8, 16)
  std::size_t num_classes = 2;
  bool include_self = true;       ///< softmax over j includes j == i
  bool channel_attention = true;  ///< off: F_CA is the plain mean of patch GAPs
  bool spatial_attention = true;  ///< off: F_PbA = F_CA
  SpatialActivation sa_activation = SpatialActivation::kSoftmax;
  DropoutKind dropout = DropoutKind::kGaussian;
  double rho = 0.2;
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;

  std::size_t attention_width() const;
  bool has_channel_params() const;
  bool has_spatial_params() const;
};

/// All learnable tensors of the head. Tensors that the configured variant
/// does not use are left undefined and are neither counted nor saved.
template <typename T>
struct PbAParams {
  HeadConfig config;

  // Cross-patch channel attention.
  Tensor<T> w_psi;        // [c x c_a]
  Tensor<T> w_psi_prime;  // [c x c_a]
  Tensor<T> b_psi;        // [c_a]
  Tensor<T> w_theta;      // [c_a x 1]
  Tensor<T> b_theta;      // [1]
  Tensor<T> w_delta;      // [1 x 1]
  Tensor<T> b_delta;      // [1]
  Tensor<T> w_phi;        // [c x 1]
  Tensor<T> b_phi;        // [1]

  // Spatial attention MLP.
  Tensor<T> mlp_weight;  // [2*h*w*n x c]
  Tensor<T> mlp_bias;    // [c]
  BatchNorm<T> mlp_bn;

  // Classifier.
  BatchNorm<T> head_bn;
  Tensor<T> head_weight;  // [c x L]
  Tensor<T> head_bias;    // [L]

  /// Glorot-uniform weights, zero biases, BN at identity.
  static PbAParams init(const HeadConfig& config, Rng& rng);

  NamedTensors<T> parameters() const;
  /// BN running moments.
  NamedTensors<T> buffers() const;
};

/// Closed-form trainable parameter count for a configuration.
std::size_t head_parameter_count(const HeadConfig& config);

template <typename T>
struct HeadOutput {
  Tensor<T> y_pred;  // [b x L]
  Tensor<T> f_pba;   // [b x c]; undefined for the baselines
  Tensor<T> f_ca;    // [b x c]
  Tensor<T> f_sa;    // [b x c]; undefined unless spatial attention runs
};

/**
 * Scalar relevance of patch j to patch i, both [h x w x c]:
 * mean over cells of sigmoid(tanh(F_i W_psi + F_j W_psi' + b_psi) W_theta + b_theta).
 */
template <typename T>
Tensor<T> pairwise_attention_logit(const Tensor<T>& fi, const Tensor<T>& fj, const PbAParams<T>& params);

template <typename T>
struct ChannelAttentionTrace {
  Tensor<T> delta;  // [b x n x n], rows sum to 1
  Tensor<T> tilde;  // [b x n x c], GAP of the delta-weighted patch maps
  Tensor<T> phi;    // [b x n], sums to 1
  Tensor<T> f_ca;   // [b x c]
};

/// patch_feats [b x n x h x w x c] -> F_CA [b x c].
template <typename T>
ChannelAttentionTrace<T> channel_attention(const Tensor<T>& patch_feats, const PbAParams<T>& params);

template <typename T>
struct SpatialAttentionTrace {
  Tensor<T> pooled;  // [b x n x h x w x 2]: channel GAP then channel GMP
  Tensor<T> probs;   // [b x c], activation output before dropout/BN
  Tensor<T> f_sa;    // [b x c]
};

/// patch_feats [b x n x h x w x c] -> F_SA [b x c]. Updates mlp_bn running
/// moments in training mode.
template <typename T>
SpatialAttentionTrace<T> spatial_attention(const Tensor<T>& patch_feats, PbAParams<T>& params, bool training,
                                           Rng& rng);

/// f_ca * f_sa + f_ca
template <typename T>
Tensor<T> fuse_pba(const Tensor<T>& f_ca, const Tensor<T>& f_sa);

/// Full PbA head: f [b x h x w x c] is the backbone map, patch_feats its
/// pooled patches [b x n x h x w x c].
template <typename T>
HeadOutput<T> classify(const Tensor<T>& f, const Tensor<T>& patch_feats, PbAParams<T>& params, bool training,
                       Rng& rng);

/// Channel attention with each of the h*w cells of f as a 1x1 element.
template <typename T>
HeadOutput<T> attention_baseline_head(const Tensor<T>& f, PbAParams<T>& params, bool training, Rng& rng);

template <typename T>
HeadOutput<T> gap_head(const Tensor<T>& f, PbAParams<T>& params, bool training, Rng& rng);

/// Dispatches on params.config.kind; `patches` is required for kPbA.
template <typename T>
HeadOutput<T> head_forward(const Tensor<T>& f, const PatchSet* patches, PbAParams<T>& params, bool training,
                           Rng& rng);

}  // namespace syd

#endif  // SYDNET_ATTENTION_HPP_

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
#include "sydnet/attention.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sydnet/error.hpp"

namespace syd {

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kPbA: return "pba";
    case HeadKind::kGap: return "gap";
    case HeadKind::kAttentionBaseline: return "attention";
  }
  return "?";
}

std::string to_string(SpatialActivation act) { return act == SpatialActivation::kSoftmax ? "softmax" : "sigmoid"; }

std::string to_string(DropoutKind kind) {
  switch (kind) {
    case DropoutKind::kGaussian: return "gaussian";
    case DropoutKind::kStandard: return "standard";
    case DropoutKind::kNone: return "none";
  }
  return "?";
}

std::size_t HeadConfig::attention_width() const { return c_a > 0 ? c_a : std::max<std::size_t>(c / 8, 16); }

bool HeadConfig::has_channel_params() const {
  return kind == HeadKind::kAttentionBaseline || (kind == HeadKind::kPbA && channel_attention);
}

bool HeadConfig::has_spatial_params() const { return kind == HeadKind::kPbA && spatial_attention; }

std::size_t head_parameter_count(const HeadConfig& cfg) {
  const std::size_t c = cfg.c, ca = cfg.attention_width(), L = cfg.num_classes;
  std::size_t total = 2 * c + c * L + L;  // classifier BN + dense
  if (cfg.has_channel_params()) total += 2 * c * ca + ca + ca + 1 + 1 + 1 + c + 1;
  if (cfg.has_spatial_params()) total += 2 * cfg.h * cfg.w * cfg.n * c + c + 2 * c;
  return total;
}

namespace {

template <typename T>
Tensor<T> glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> data(fan_in * fan_out);
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>({fan_in, fan_out}, std::move(data), true);
}

template <typename T>
Tensor<T> zeros(std::size_t n) {
  return Tensor<T>({n}, T(0), true);
}

template <typename T>
Tensor<T> regularize(const Tensor<T>& x, const HeadConfig& cfg, bool training, Rng& rng) {
  switch (cfg.dropout) {
    case DropoutKind::kGaussian: return gaussian_dropout(x, cfg.rho, training, rng);
    case DropoutKind::kStandard: return dropout(x, cfg.rho, training, rng);
    case DropoutKind::kNone: return x;
  }
  return x;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add(matmul(x, w), b);
}

// Dropout, BN, dense, softmax.
template <typename T>
Tensor<T> classifier(const Tensor<T>& features, PbAParams<T>& params, bool training, Rng& rng) {
  auto reg = batch_norm(regularize(features, params.config, training, rng), params.head_bn, training);
  return softmax(dense(reg, params.head_weight, params.head_bias), 1);
}

void check_patch_stack(const Shape& s, std::size_t c, const char* op) {
  if (s.size() != 5 || s[4] != c) {
    throw DimensionError(std::string(op) + ": expected patch stack [b x n x h x w x " + std::to_string(c) +
                         "], got " + shape_str(s));
  }
}

template <typename T>
void check_map(const Tensor<T>& f, const HeadConfig& cfg, const char* op) {
  if (f.rank() != 4 || f.dim(3) != cfg.c) {
    throw DimensionError(std::string(op) + ": expected feature map [b x h x w x " + std::to_string(cfg.c) +
                         "], got " + shape_str(f.shape()));
  }
}

}  // namespace

template <typename T>
PbAParams<T> PbAParams<T>::init(const HeadConfig& cfg, Rng& rng) {
  if (cfg.c == 0 || cfg.n == 0 || cfg.h == 0 || cfg.w == 0 || cfg.num_classes < 2) {
    throw ParameterError("head geometry must be positive with at least two classes");
  }
  PbAParams p;
  p.config = cfg;
  const std::size_t c = cfg.c, ca = cfg.attention_width();
  if (cfg.has_channel_params()) {
    p.w_psi = glorot<T>(c, ca, rng);
    p.w_psi_prime = glorot<T>(c, ca, rng);
    p.b_psi = zeros<T>(ca);
    p.w_theta = glorot<T>(ca, 1, rng);
    p.b_theta = zeros<T>(1);
    p.w_delta = glorot<T>(1, 1, rng);
    p.b_delta = zeros<T>(1);
    p.w_phi = glorot<T>(c, 1, rng);
    p.b_phi = zeros<T>(1);
  }
  if (cfg.has_spatial_params()) {
    p.mlp_weight = glorot<T>(2 * cfg.h * cfg.w * cfg.n, c, rng);
    p.mlp_bias = zeros<T>(c);
    p.mlp_bn = BatchNorm<T>(c, cfg.bn_momentum, cfg.bn_eps);
  }
  p.head_bn = BatchNorm<T>(c, cfg.bn_momentum, cfg.bn_eps);
  p.head_weight = glorot<T>(c, cfg.num_classes, rng);
  p.head_bias = zeros<T>(cfg.num_classes);
  return p;
}

template <typename T>
NamedTensors<T> PbAParams<T>::parameters() const {
  NamedTensors<T> out;
  auto put = [&](const char* name, const Tensor<T>& t) {
    if (t.defined()) out.push_back({name, t});
  };
  put("head.ca.w_psi", w_psi);
  put("head.ca.w_psi_prime", w_psi_prime);
  put("head.ca.b_psi", b_psi);
  put("head.ca.w_theta", w_theta);
  put("head.ca.b_theta", b_theta);
  put("head.ca.w_delta", w_delta);
  put("head.ca.b_delta", b_delta);
  put("head.ca.w_phi", w_phi);
  put("head.ca.b_phi", b_phi);
  put("head.sa.mlp_weight", mlp_weight);
  put("head.sa.mlp_bias", mlp_bias);
  put("head.sa.bn.gamma", mlp_bn.gamma);
  put("head.sa.bn.beta", mlp_bn.beta);
  put("head.cls.bn.gamma", head_bn.gamma);
  put("head.cls.bn.beta", head_bn.beta);
  put("head.cls.weight", head_weight);
  put("head.cls.bias", head_bias);
  return out;
}

template <typename T>
NamedTensors<T> PbAParams<T>::buffers() const {
  NamedTensors<T> out;
  if (mlp_bn.running_mean.defined()) {
    out.push_back({"head.sa.bn.running_mean", mlp_bn.running_mean});
    out.push_back({"head.sa.bn.running_var", mlp_bn.running_var});
  }
  out.push_back({"head.cls.bn.running_mean", head_bn.running_mean});
  out.push_back({"head.cls.bn.running_var", head_bn.running_var});
  return out;
}

template <typename T>
Tensor<T> pairwise_attention_logit(const Tensor<T>& fi, const Tensor<T>& fj, const PbAParams<T>& params) {
  const std::size_t c = params.config.c;
  if (fi.shape() != fj.shape() || fi.rank() != 3 || fi.dim(2) != c) {
    throw DimensionError("pairwise_attention_logit: patches " + shape_str(fi.shape()) + " and " +
                         shape_str(fj.shape()) + " do not match channel width " + std::to_string(c));
  }
  if (!params.w_psi.defined()) throw DimensionError("pairwise_attention_logit: head has no channel-attention weights");
  const std::size_t cells = fi.dim(0) * fi.dim(1);
  auto a = matmul(reshape(fi, {cells, c}), params.w_psi);
  auto b = matmul(reshape(fj, {cells, c}), params.w_psi_prime);
  auto psi = tanh(add(add(a, b), params.b_psi));
  auto theta = sigmoid(add(matmul(psi, params.w_theta), params.b_theta));
  return mean(reshape(theta, {cells}), 0);
}

template <typename T>
ChannelAttentionTrace<T> channel_attention(const Tensor<T>& patch_feats, const PbAParams<T>& params) {
  const HeadConfig& cfg = params.config;
  check_patch_stack(patch_feats.shape(), cfg.c, "channel_attention");
  if (!params.w_psi.defined()) throw DimensionError("channel_attention: head has no channel-attention weights");
  const std::size_t b = patch_feats.dim(0), n = patch_feats.dim(1);
  const std::size_t cells = patch_feats.dim(2) * patch_feats.dim(3);
  const std::size_t c = cfg.c, ca = cfg.attention_width();

  // psi_{i,j} at every cell: tanh(F_i W_psi + F_j W_psi' + b_psi)
  auto rows = reshape(patch_feats, {b * n * cells, c});
  auto query = reshape(matmul(rows, params.w_psi), {b, n, 1, cells, ca});
  auto key = reshape(matmul(rows, params.w_psi_prime), {b, 1, n, cells, ca});
  auto psi = tanh(add(add(query, key), params.b_psi));
  auto theta = sigmoid(add(matmul(reshape(psi, {b * n * n * cells, ca}), params.w_theta), params.b_theta));
  auto score = mean(reshape(theta, {b, n, n, cells}), 3);  // [b x n x n]

  auto logits = add(mul(score, reshape(params.w_delta, {1})), params.b_delta);
  if (!cfg.include_self && n > 1) {
    std::vector<T> mask(n * n, T(0));
    for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = static_cast<T>(-1e30);
    logits = add(logits, Tensor<T>({n, n}, std::move(mask)));
  }
  auto delta = softmax(logits, 2);

  // GAP(sum_j delta_ij F_j) = sum_j delta_ij GAP(F_j)
  auto gap = mean(reshape(patch_feats, {b, n, cells, c}), 2);  // [b x n x c]
  auto tilde = sum(mul(reshape(delta, {b, n, n, 1}), reshape(gap, {b, 1, n, c})), 2);
  auto phi_logits = add(matmul(reshape(tilde, {b * n, c}), params.w_phi), params.b_phi);
  auto phi = softmax(reshape(phi_logits, {b, n}), 1);
  auto f_ca = sum(mul(reshape(phi, {b, n, 1}), tilde), 1);
  return {delta, tilde, phi, f_ca};
}

template <typename T>
SpatialAttentionTrace<T> spatial_attention(const Tensor<T>& patch_feats, PbAParams<T>& params, bool training,
                                           Rng& rng) {
  const HeadConfig& cfg = params.config;
  check_patch_stack(patch_feats.shape(), cfg.c, "spatial_attention");
  if (!params.mlp_weight.defined()) throw DimensionError("spatial_attention: head has no spatial-attention weights");
  const std::size_t b = patch_feats.dim(0);
  const std::size_t flat = 2 * patch_feats.dim(1) * patch_feats.dim(2) * patch_feats.dim(3);
  if (flat != params.mlp_weight.dim(0)) {
    throw DimensionError("spatial_attention: patch stack " + shape_str(patch_feats.shape()) +
                         " does not match MLP input width " + std::to_string(params.mlp_weight.dim(0)));
  }
  const std::array<Tensor<T>, 2> planes{global_avg_pool(patch_feats, PoolOver::kChannel),
                                        global_max_pool(patch_feats, PoolOver::kChannel)};
  auto pooled = concat<T>(planes, 4);
  auto logits = dense(reshape(pooled, {b, flat}), params.mlp_weight, params.mlp_bias);
  auto probs = cfg.sa_activation == SpatialActivation::kSoftmax ? softmax(logits, 1) : sigmoid(logits);
  auto f_sa = batch_norm(regularize(probs, cfg, training, rng), params.mlp_bn, training);
  return {pooled, probs, f_sa};
}

template <typename T>
Tensor<T> fuse_pba(const Tensor<T>& f_ca, const Tensor<T>& f_sa) {
  if (f_ca.shape() != f_sa.shape()) {
    throw DimensionError("fuse_pba: " + shape_str(f_ca.shape()) + " vs " + shape_str(f_sa.shape()));
  }
  return add(mul(f_ca, f_sa), f_ca);
}

template <typename T>
HeadOutput<T> classify(const Tensor<T>& f, const Tensor<T>& patch_feats, PbAParams<T>& params, bool training,
                       Rng& rng) {
  const HeadConfig& cfg = params.config;
  check_map(f, cfg, "classify");
  check_patch_stack(patch_feats.shape(), cfg.c, "classify");
  HeadOutput<T> out;
  if (cfg.channel_attention) {
    out.f_ca = channel_attention(patch_feats, params).f_ca;
  } else {
    // Patches without attention: uniform average of the patch descriptors.
    const std::size_t b = patch_feats.dim(0), n = patch_feats.dim(1);
    const std::size_t cells = patch_feats.dim(2) * patch_feats.dim(3);
    out.f_ca = mean(mean(reshape(patch_feats, {b, n, cells, cfg.c}), 2), 1);
  }
  if (cfg.spatial_attention) {
    out.f_sa = spatial_attention(patch_feats, params, training, rng).f_sa;
    out.f_pba = fuse_pba(out.f_ca, out.f_sa);
  } else {
    out.f_pba = out.f_ca;
  }
  auto f_final = add(out.f_pba, global_avg_pool(f, PoolOver::kSpatial));
  out.y_pred = classifier(f_final, params, training, rng);
  return out;
}

template <typename T>
HeadOutput<T> attention_baseline_head(const Tensor<T>& f, PbAParams<T>& params, bool training, Rng& rng) {
  const HeadConfig& cfg = params.config;
  check_map(f, cfg, "attention_baseline_head");
  const std::size_t b = f.dim(0), cells = f.dim(1) * f.dim(2);
  HeadOutput<T> out;
  out.f_ca = channel_attention(reshape(f, {b, cells, 1, 1, cfg.c}), params).f_ca;
  out.y_pred = classifier(out.f_ca, params, training, rng);
  return out;
}

template <typename T>
HeadOutput<T> gap_head(const Tensor<T>& f, PbAParams<T>& params, bool training, Rng& rng) {
  check_map(f, params.config, "gap_head");
  HeadOutput<T> out;
  out.y_pred = classifier(global_avg_pool(f, PoolOver::kSpatial), params, training, rng);
  return out;
}

template <typename T>
HeadOutput<T> head_forward(const Tensor<T>& f, const PatchSet* patches, PbAParams<T>& params, bool training,
                           Rng& rng) {
  switch (params.config.kind) {
    case HeadKind::kGap: return gap_head(f, params, training, rng);
    case HeadKind::kAttentionBaseline: return attention_baseline_head(f, params, training, rng);
    case HeadKind::kPbA:
      if (patches == nullptr) throw DimensionError("head_forward: PbA head needs a patch set");
      return classify(f, extract_patch_features(f, *patches), params, training, rng);
  }
  throw DimensionError("head_forward: unknown head kind");
}

#define SYD_INSTANTIATE_ATTENTION(T)                                                                       \
  template struct PbAParams<T>;                                                                           \
  template Tensor<T> pairwise_attention_logit(const Tensor<T>&, const Tensor<T>&, const PbAParams<T>&);   \
  template ChannelAttentionTrace<T> channel_attention(const Tensor<T>&, const PbAParams<T>&);             \
  template SpatialAttentionTrace<T> spatial_attention(const Tensor<T>&, PbAParams<T>&, bool, Rng&);       \
  template Tensor<T> fuse_pba(const Tensor<T>&, const Tensor<T>&);                                        \
  template HeadOutput<T> classify(const Tensor<T>&, const Tensor<T>&, PbAParams<T>&, bool, Rng&);         \
  template HeadOutput<T> attention_baseline_head(const Tensor<T>&, PbAParams<T>&, bool, Rng&);            \
  template HeadOutput<T> gap_head(const Tensor<T>&, PbAParams<T>&, bool, Rng&);                           \
  template HeadOutput<T> head_forward(const Tensor<T>&, const PatchSet*, PbAParams<T>&, bool, Rng&);

SYD_INSTANTIATE_ATTENTION(float)
SYD_INSTANTIATE_ATTENTION(double)

}  // namespace syd

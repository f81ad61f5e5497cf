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
#ifndef SYDNET_TESTS_SUPPORT_PBA_FIXTURE_HPP_
#define SYDNET_TESTS_SUPPORT_PBA_FIXTURE_HPP_

#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "sydnet/attention.hpp"

namespace syd::testing {

inline std::vector<double> copy_of(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

/// Image `b` of a [B x h x w x c] tensor.
inline Map map_of(const Tensor<double>& t, std::size_t b) {
  Map m(t.dim(1), t.dim(2), t.dim(3));
  const std::size_t stride = m.v.size();
  std::copy(t.data().begin() + b * stride, t.data().begin() + (b + 1) * stride, m.v.begin());
  return m;
}

inline void randomize(Tensor<double>& t, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.mutable_data()) v = dist(rng);
}

inline void randomize(BatchNorm<double>& bn, Rng& rng) {
  randomize(bn.gamma, rng, 0.5, 1.5);
  randomize(bn.beta, rng, -0.5, 0.5);
  randomize(bn.running_mean, rng, -0.5, 0.5);
  randomize(bn.running_var, rng, 0.5, 2.0);
}

/// Head with every weight, bias and BN moment drawn at random so no term of
/// the forward pass is trivially zero or one.
inline PbAParams<double> random_head(const HeadConfig& cfg, Rng& rng) {
  auto p = PbAParams<double>::init(cfg, rng);
  for (auto& [name, t] : p.parameters()) {
    auto handle = t;
    randomize(handle, rng, -1.0, 1.0);
  }
  if (cfg.has_spatial_params()) randomize(p.mlp_bn, rng);
  randomize(p.head_bn, rng);
  return p;
}

inline HeadWeights weights_of(const PbAParams<double>& p) {
  HeadWeights w;
  w.c = p.config.c;
  w.ca = p.config.attention_width();
  w.L = p.config.num_classes;
  w.include_self = p.config.include_self;
  w.eps = p.config.bn_eps;
  w.w_psi = copy_of(p.w_psi);
  w.w_psi_prime = copy_of(p.w_psi_prime);
  w.b_psi = copy_of(p.b_psi);
  w.w_theta = copy_of(p.w_theta);
  w.b_theta = p.b_theta.at(0);
  w.w_delta = p.w_delta.at(0);
  w.b_delta = p.b_delta.at(0);
  w.w_phi = copy_of(p.w_phi);
  w.b_phi = p.b_phi.at(0);
  w.mlp_w = copy_of(p.mlp_weight);
  w.mlp_b = copy_of(p.mlp_bias);
  w.sa_gamma = copy_of(p.mlp_bn.gamma);
  w.sa_beta = copy_of(p.mlp_bn.beta);
  w.sa_mean = copy_of(p.mlp_bn.running_mean);
  w.sa_var = copy_of(p.mlp_bn.running_var);
  w.cls_gamma = copy_of(p.head_bn.gamma);
  w.cls_beta = copy_of(p.head_bn.beta);
  w.cls_mean = copy_of(p.head_bn.running_mean);
  w.cls_var = copy_of(p.head_bn.running_var);
  w.cls_w = copy_of(p.head_weight);
  w.cls_b = copy_of(p.head_bias);
  return w;
}

inline std::vector<Rect> rects_of(const PatchSet& set) {
  std::vector<Rect> out;
  for (const auto& s : set.all()) out.push_back({s.x, s.y, s.dw, s.dh});
  return out;
}

}  // namespace syd::testing

#endif  // SYDNET_TESTS_SUPPORT_PBA_FIXTURE_HPP_

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
#include "sydnet/head_check.hpp"

#include <cmath>

#include "sydnet/error.hpp"

namespace syd {

namespace {

void fill_uniform(Tensor<double> t, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.mutable_data()) v = dist(rng);
}

void fill_bn(BatchNorm<double>& bn, Rng& rng) {
  fill_uniform(bn.gamma, rng, 0.5, 1.5);
  fill_uniform(bn.beta, rng, -0.5, 0.5);
  fill_uniform(bn.running_mean, rng, -0.5, 0.5);
  fill_uniform(bn.running_var, rng, 0.5, 2.0);
}

}  // namespace

PatchSet check_patch_set(std::size_t n) {
  if (n == 0) throw ParameterError("patch count must be positive");
  if (n == 1) return custom_patch_set(4, 0, 1);
  std::size_t k = 2;
  while (k * k < n - 1) k += 2;  // even, so no tile sits at the centre
  PatchSet set;
  set.name = "check";
  set.grid = 4 * k;
  set.uniform = uniform_grid(set.grid, 4);
  set.uniform.resize(n - 1);
  set.hierarchical = hierarchical_patches(set.grid, 1);
  return set;
}

std::vector<GradCheckResult> head_gradient_check(const HeadCheckSpec& spec) {
  HeadConfig cfg;
  cfg.kind = HeadKind::kPbA;
  cfg.n = spec.n;
  cfg.h = spec.h;
  cfg.w = spec.w;
  cfg.c = spec.c;
  cfg.c_a = spec.c_a;
  cfg.num_classes = spec.num_classes;
  cfg.include_self = spec.include_self;
  cfg.sa_activation = spec.sa_activation;
  const PatchSet set = check_patch_set(spec.n);

  Rng rng(spec.seed);
  auto params = PbAParams<double>::init(cfg, rng);
  for (auto& p : params.parameters()) fill_uniform(p.tensor, rng, -1.0, 1.0);
  // Pair scores lie in (0, 1); a small W_delta leaves delta near uniform and
  // phi's gradient near zero.
  fill_uniform(params.w_delta, rng, 4.0, 8.0);
  fill_bn(params.mlp_bn, rng);
  fill_bn(params.head_bn, rng);

  Tensor<double> f({spec.batch, spec.h, spec.w, spec.c}, 0.0, true);
  fill_uniform(f, rng, 0.0, 1.0);
  std::vector<int> labels(spec.batch);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(spec.num_classes) - 1);
  for (auto& l : labels) l = pick(rng);

  NamedTensors<double> inputs = params.parameters();
  for (auto& p : inputs) p.tensor.set_requires_grad(true);
  inputs.push_back({"input.f", f});
  auto loss = [&] {
    Rng unused(0);
    return cross_entropy(head_forward(f, &set, params, false, unused).y_pred, std::span<const int>(labels));
  };
  return check_gradients(loss, inputs, spec.options);
}

}  // namespace syd

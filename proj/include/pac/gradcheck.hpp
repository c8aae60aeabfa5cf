/* Copyright 2026 The PAC Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "pac/camera_geometry.hpp"
#include "pac/offset_field.hpp"
#include "pac/pac_module.hpp"
#include "pac/perspective_conv.hpp"
#include "pac/random.hpp"

// Central-difference checks of the analytic backward passes.
namespace pac::gradcheck {

struct GroupError {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
};

struct Report {
  std::vector<GroupError> groups;
  double tolerance = 0.0;

  double max_error() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, std::isnan(g.max_rel_error) ? INFINITY : g.max_rel_error);
    return m;
  }
  bool passed() const { return max_error() < tolerance; }
};

template <typename T>
constexpr double default_tolerance() {
  return std::is_same_v<T, float> ? 1e-2 : 1e-6;
}

template <typename T>
constexpr double default_eps() {
  return std::is_same_v<T, float> ? 1e-2 : 1e-6;
}

// |a - n| relative to max(1, |a|, |n|).
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// Perturbs every element of `values` by +-eps and compares the central
// difference of loss() with the matching analytic entry.
template <typename T>
GroupError check_group(std::string name, Tensor<T>& values, const Tensor<T>& analytic, double eps,
                       const std::function<double()>& loss) {
  GroupError err{std::move(name), values.size(), 0.0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T saved = values[i];
    values[i] = static_cast<T>(static_cast<double>(saved) + eps);
    const double up = loss();
    values[i] = static_cast<T>(static_cast<double>(saved) - eps);
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double e = relative_error(static_cast<double>(analytic[i]), numeric);
    err.max_rel_error = std::isnan(e) ? e : std::max(err.max_rel_error, e);
    if (std::isnan(err.max_rel_error)) break;
  }
  return err;
}

// Camera whose horizon crosses an 8x8 map, so both sides are sampled.
inline geometry::AngleField small_angle_field(std::size_t h, std::size_t w) {
  const geometry::CameraIntrinsics k{static_cast<double>(w), static_cast<double>(w), 0.45 * static_cast<double>(w),
                                     0.25 * static_cast<double>(h)};
  return geometry::angle_field(w, h, k, {1.65});
}

template <typename T>
Report conv_gradcheck(std::uint64_t seed, double eps = default_eps<T>(), unsigned threads = 1) {
  SplitMix64 rng(seed);
  const std::size_t n = 2, ci = 3, co = 4, h = 8, w = 8;
  Tensor<T> input = random_tensor<T>({n, ci, h, w}, rng);
  ConvParams<T> params{random_tensor<T>({co, ci, 3, 3}, rng), random_tensor<T>({co}, rng)};
  const Tensor<T> cotangent = random_tensor<T>({n, co, h, w}, rng);
  const OffsetField offsets = build_offset_field(small_angle_field(h, w), {3, 3, 2});

  const auto grads = pac_conv_backward(input, params, offsets, cotangent, threads);
  auto loss = [&] { return dot(cotangent, pac_conv_forward(input, params, offsets, {ConvImpl::Gather, threads})); };

  Report r{{}, default_tolerance<T>()};
  r.groups.push_back(check_group("conv.input", input, grads.input, eps, loss));
  r.groups.push_back(check_group("conv.weights", params.weights, grads.weights, eps, loss));
  r.groups.push_back(check_group("conv.bias", params.bias, grads.bias, eps, loss));
  return r;
}

// Default five-branch module with activation none (no kinks).
template <typename T>
Report module_gradcheck(std::uint64_t seed, double eps = default_eps<T>(), unsigned threads = 1) {
  SplitMix64 rng(seed ^ 0x5A5A5A5AULL);
  const std::size_t n = 2, ci = 3, h = 8, w = 8;
  PacModuleConfig config;
  config.c_in = ci;
  config.c_mid = 4;
  config.c_out = 4;
  config.activation = Activation::None;
  config.seed = seed;
  auto params = init_params<T>(config);
  for (auto& b : params.branches) b.bias = random_tensor<T>(b.bias.dims(), rng);
  params.fusion.bias = random_tensor<T>(params.fusion.bias.dims(), rng);
  Tensor<T> input = random_tensor<T>({n, ci, h, w}, rng);
  const Tensor<T> cotangent = random_tensor<T>({n, config.c_out, h, w}, rng);
  const auto angles = small_angle_field(h, w);

  const auto grads = pac_module_backward(input, params, config, angles, cotangent, threads);
  auto loss = [&] { return dot(cotangent, pac_module_forward(input, params, config, angles, threads)); };

  Report r{{}, default_tolerance<T>()};
  r.groups.push_back(check_group("module.input", input, grads.input, eps, loss));
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    const std::string prefix = "module.branch" + std::to_string(b);
    r.groups.push_back(check_group(prefix + ".weights", params.branches[b].weights, grads.params.branches[b].weights,
                                   eps, loss));
    r.groups.push_back(check_group(prefix + ".bias", params.branches[b].bias, grads.params.branches[b].bias, eps, loss));
  }
  r.groups.push_back(check_group("module.fusion.weights", params.fusion.weights, grads.params.fusion.weights, eps, loss));
  r.groups.push_back(check_group("module.fusion.bias", params.fusion.bias, grads.params.fusion.bias, eps, loss));
  return r;
}

}  // namespace pac::gradcheck

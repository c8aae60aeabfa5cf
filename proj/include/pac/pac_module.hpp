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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pac/camera_geometry.hpp"
#include "pac/error.hpp"
#include "pac/offset_field.hpp"
#include "pac/perspective_conv.hpp"
#include "pac/random.hpp"
#include "pac/tensor.hpp"

namespace pac {

enum class BranchKind { Standard, Perspective };
enum class Activation { None, Relu };

struct PacBranchConfig {
  BranchKind kind = BranchKind::Perspective;
  std::size_t dilation = 1;

  friend bool operator==(const PacBranchConfig&, const PacBranchConfig&) = default;
};

struct PacModuleConfig {
  std::vector<PacBranchConfig> branches = default_branches();
  std::size_t c_in = 1;
  std::size_t c_mid = 1;
  std::size_t c_out = 1;
  Activation activation = Activation::Relu;
  std::uint64_t seed = 0;

  // Standard 3x3 branch followed by perspective branches at dilations 2, 4, 6, 8.
  static std::vector<PacBranchConfig> default_branches() {
    return {{BranchKind::Standard, 1},
            {BranchKind::Perspective, 2},
            {BranchKind::Perspective, 4},
            {BranchKind::Perspective, 6},
            {BranchKind::Perspective, 8}};
  }

  void validate() const {
    if (branches.empty()) throw Error(Errc::InvalidArgument, "module needs at least one branch");
    if (c_in == 0 || c_mid == 0 || c_out == 0) throw Error(Errc::InvalidArgument, "channel counts must be >= 1");
    for (const auto& b : branches) {
      if (b.dilation == 0) throw Error(Errc::InvalidArgument, "branch dilation must be >= 1");
      if (b.kind == BranchKind::Standard && b.dilation != 1)
        throw Error(Errc::InvalidArgument, "standard branch uses dilation 1");
    }
  }
};

template <typename T>
struct PacModuleParams {
  std::vector<ConvParams<T>> branches;  // each [c_mid, c_in, 3, 3]
  ConvParams<T> fusion;                 // [c_out, branches * c_mid, 1, 1]

  void validate(const PacModuleConfig& config) const {
    config.validate();
    if (branches.size() != config.branches.size())
      throw Error(Errc::ShapeMismatch, "parameter set has " + std::to_string(branches.size()) + " branches, config has " +
                                           std::to_string(config.branches.size()));
    for (const auto& b : branches) {
      b.validate();
      if (b.weights.dims() != Shape{config.c_mid, config.c_in, 3, 3})
        throw Error(Errc::ShapeMismatch, "branch weights " + shape_str(b.weights.dims()) + " do not match config");
    }
    fusion.validate();
    if (fusion.weights.dims() != Shape{config.c_out, config.branches.size() * config.c_mid, 1, 1})
      throw Error(Errc::ShapeMismatch, "fusion weights " + shape_str(fusion.weights.dims()) + " do not match config");
  }

  friend bool operator==(const PacModuleParams& a, const PacModuleParams& b) {
    if (a.branches.size() != b.branches.size()) return false;
    for (std::size_t i = 0; i < a.branches.size(); ++i)
      if (a.branches[i].weights != b.branches[i].weights || a.branches[i].bias != b.branches[i].bias) return false;
    return a.fusion.weights == b.fusion.weights && a.fusion.bias == b.fusion.bias;
  }
};

// Weights ~ U[-b, b), b = sqrt(6 / fan_in); biases zero. One stream feeds
// the branch weights in config order and then the fusion weights.
template <typename T>
PacModuleParams<T> init_params(const PacModuleConfig& config) {
  config.validate();
  SplitMix64 rng(config.seed);
  auto fill = [&rng](ConvParams<T>& p) {
    const double fan_in = static_cast<double>(p.c_in() * p.rows() * p.cols());
    const double bound = std::sqrt(6.0 / fan_in);
    for (T& w : p.weights.storage()) w = static_cast<T>(bound * (2.0 * rng.uniform() - 1.0));
  };
  PacModuleParams<T> params;
  for (std::size_t i = 0; i < config.branches.size(); ++i) {
    params.branches.push_back(ConvParams<T>::zeros(config.c_mid, config.c_in, 3, 3));
    fill(params.branches.back());
  }
  params.fusion = ConvParams<T>::zeros(config.c_out, config.branches.size() * config.c_mid, 1, 1);
  fill(params.fusion);
  return params;
}

template <typename T>
struct PacModuleGrads {
  Tensor<T> input;
  PacModuleParams<T> params;
};

namespace detail {

template <typename T>
void apply_activation(Tensor<T>& t, Activation act) {
  if (act == Activation::Relu)
    for (T& v : t.storage()) v = v > T{0} ? v : T{0};
}

// Zeroes gradient entries whose pre-activation was not strictly positive.
template <typename T>
void activation_backward(Tensor<T>& grad, const Tensor<T>& pre, Activation act) {
  if (act != Activation::Relu) return;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(pre[i] > T{0})) grad[i] = T{0};
}

template <typename T>
struct ModuleTrace {
  std::vector<OffsetField> offsets;       // empty entries for standard branches
  std::vector<Tensor<T>> branch_pre;      // pre-activation branch outputs
  Tensor<T> concat;                       // activated branch outputs stacked on channels
  Tensor<T> fused_pre;
};

template <typename T>
ModuleTrace<T> module_forward_trace(const Tensor<T>& input, const PacModuleParams<T>& params,
                                    const PacModuleConfig& config, const geometry::AngleField& angles,
                                    unsigned threads) {
  params.validate(config);
  require_rank(input, 4, "input");
  if (input.dim(1) != config.c_in)
    throw Error(Errc::ShapeMismatch, "input " + shape_str(input.dims()) + " does not have c_in = " +
                                         std::to_string(config.c_in) + " channels");
  angles.validate();
  if (angles.height != input.dim(2) || angles.width != input.dim(3))
    throw Error(Errc::ShapeMismatch, "angle field " + std::to_string(angles.height) + "x" +
                                         std::to_string(angles.width) + " does not match input " +
                                         shape_str(input.dims()));

  const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3), hw = h * w;
  const std::size_t nb = config.branches.size(), cm = config.c_mid;
  ModuleTrace<T> trace;
  trace.concat = Tensor<T>({n, nb * cm, h, w});
  for (std::size_t bi = 0; bi < nb; ++bi) {
    const auto& bc = config.branches[bi];
    Tensor<T> pre;
    if (bc.kind == BranchKind::Standard) {
      trace.offsets.emplace_back();
      pre = standard_conv_forward(input, params.branches[bi], bc.dilation, threads);
    } else {
      trace.offsets.push_back(build_offset_field(angles, {3, 3, bc.dilation}, threads));
      pre = pac_conv_forward(input, params.branches[bi], trace.offsets.back(), {ConvImpl::Gather, threads});
    }
    Tensor<T> act = pre;
    apply_activation(act, config.activation);
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(act.data().begin() + static_cast<std::ptrdiff_t>(b * cm * hw), cm * hw,
                  trace.concat.storage().begin() + static_cast<std::ptrdiff_t>((b * nb + bi) * cm * hw));
    trace.branch_pre.push_back(std::move(pre));
  }
  trace.fused_pre = standard_conv_forward(trace.concat, params.fusion, 1, threads);
  return trace;
}

}  // namespace detail

// Parallel branches -> activation -> channel concat -> 1x1 fusion -> activation.
template <typename T>
Tensor<T> pac_module_forward(const Tensor<T>& input, const PacModuleParams<T>& params, const PacModuleConfig& config,
                             const geometry::AngleField& angles, unsigned threads = 1) {
  auto trace = detail::module_forward_trace(input, params, config, angles, threads);
  detail::apply_activation(trace.fused_pre, config.activation);
  return std::move(trace.fused_pre);
}

template <typename T>
PacModuleGrads<T> pac_module_backward(const Tensor<T>& input, const PacModuleParams<T>& params,
                                      const PacModuleConfig& config, const geometry::AngleField& angles,
                                      const Tensor<T>& grad_output, unsigned threads = 1) {
  const auto trace = detail::module_forward_trace(input, params, config, angles, threads);
  if (grad_output.dims() != trace.fused_pre.dims())
    throw Error(Errc::ShapeMismatch, "grad_output " + shape_str(grad_output.dims()) + " does not match module output " +
                                         shape_str(trace.fused_pre.dims()));

  const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3), hw = h * w;
  const std::size_t nb = config.branches.size(), cm = config.c_mid;

  Tensor<T> g_fused = grad_output;
  detail::activation_backward(g_fused, trace.fused_pre, config.activation);
  auto fusion_grads = standard_conv_backward(trace.concat, params.fusion, 1, g_fused, threads);

  PacModuleGrads<T> grads;
  grads.input = Tensor<T>(input.dims());
  grads.params.fusion = {std::move(fusion_grads.weights), std::move(fusion_grads.bias)};
  for (std::size_t bi = 0; bi < nb; ++bi) {
    Tensor<T> g_branch({n, cm, h, w});
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(fusion_grads.input.data().begin() + static_cast<std::ptrdiff_t>((b * nb + bi) * cm * hw), cm * hw,
                  g_branch.storage().begin() + static_cast<std::ptrdiff_t>(b * cm * hw));
    detail::activation_backward(g_branch, trace.branch_pre[bi], config.activation);
    const auto& bc = config.branches[bi];
    auto bg = bc.kind == BranchKind::Standard
                  ? standard_conv_backward(input, params.branches[bi], bc.dilation, g_branch, threads)
                  : pac_conv_backward(input, params.branches[bi], trace.offsets[bi], g_branch, threads);
    for (std::size_t i = 0; i < grads.input.size(); ++i) grads.input[i] += bg.input[i];
    grads.params.branches.push_back({std::move(bg.weights), std::move(bg.bias)});
  }
  return grads;
}

}  // namespace pac

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

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pac/error.hpp"
#include "pac/offset_field.hpp"
#include "pac/parallel.hpp"
#include "pac/tensor.hpp"

namespace pac {

template <typename T>
struct ConvParams {
  Tensor<T> weights;  // [c_out, c_in, rows, cols], taps row-major
  Tensor<T> bias;     // [c_out]

  std::size_t c_out() const { return weights.dim(0); }
  std::size_t c_in() const { return weights.dim(1); }
  std::size_t rows() const { return weights.dim(2); }
  std::size_t cols() const { return weights.dim(3); }
  std::size_t taps() const { return rows() * cols(); }

  static ConvParams zeros(std::size_t c_out, std::size_t c_in, std::size_t rows, std::size_t cols) {
    return {Tensor<T>({c_out, c_in, rows, cols}), Tensor<T>({c_out})};
  }

  void validate() const {
    require_rank(weights, 4, "weights");
    require_rank(bias, 1, "bias");
    if (bias.dim(0) != c_out())
      throw Error(Errc::ShapeMismatch, "bias " + shape_str(bias.dims()) + " does not match weights " +
                                           shape_str(weights.dims()));
    require_finite(weights, "weights");
    require_finite(bias, "bias");
  }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

enum class ConvImpl { Naive, Gather };

struct ConvOptions {
  ConvImpl impl = ConvImpl::Gather;
  unsigned threads = 1;
};

// Bilinear read of a [h, w] plane at (x, y); neighbors outside the plane are zero.
template <typename T>
T bilinear_sample(std::span<const T> plane, std::size_t h, std::size_t w, double x, double y) {
  const double fw = static_cast<double>(w), fh = static_cast<double>(h);
  if (!(x > -1.0 && x < fw && y > -1.0 && y < fh)) return T{0};
  const double x0 = std::floor(x), y0 = std::floor(y);
  const double ax = x - x0, ay = y - y0;
  const long ix = static_cast<long>(x0), iy = static_cast<long>(y0);
  const T w00 = static_cast<T>((1.0 - ax) * (1.0 - ay));
  const T w01 = static_cast<T>(ax * (1.0 - ay));
  const T w10 = static_cast<T>((1.0 - ax) * ay);
  const T w11 = static_cast<T>(ax * ay);
  const long lw = static_cast<long>(w), lh = static_cast<long>(h);
  auto in = [&](long yy, long xx) { return yy >= 0 && yy < lh && xx >= 0 && xx < lw; };
  auto val = [&](long yy, long xx) { return plane[static_cast<std::size_t>(yy * lw + xx)]; };
  T s{0};
  if (in(iy, ix)) s += w00 * val(iy, ix);
  if (in(iy, ix + 1)) s += w01 * val(iy, ix + 1);
  if (in(iy + 1, ix)) s += w10 * val(iy + 1, ix);
  if (in(iy + 1, ix + 1)) s += w11 * val(iy + 1, ix + 1);
  return s;
}

// Precomputed bilinear corners of one tap. Out-of-plane corners carry weight
// zero and index zero so they can be read unconditionally.
template <typename T>
struct BilinearTap {
  std::array<std::size_t, 4> index{};
  std::array<T, 4> weight{};
};

template <typename T>
BilinearTap<T> make_bilinear_tap(std::size_t h, std::size_t w, double x, double y) {
  BilinearTap<T> tap;
  const double fw = static_cast<double>(w), fh = static_cast<double>(h);
  if (!(x > -1.0 && x < fw && y > -1.0 && y < fh)) return tap;
  const double x0 = std::floor(x), y0 = std::floor(y);
  const double ax = x - x0, ay = y - y0;
  const long ix = static_cast<long>(x0), iy = static_cast<long>(y0);
  const std::array<T, 4> wts{static_cast<T>((1.0 - ax) * (1.0 - ay)), static_cast<T>(ax * (1.0 - ay)),
                             static_cast<T>((1.0 - ax) * ay), static_cast<T>(ax * ay)};
  const std::array<long, 4> cy{iy, iy, iy + 1, iy + 1}, cx{ix, ix + 1, ix, ix + 1};
  for (std::size_t q = 0; q < 4; ++q) {
    if (cy[q] >= 0 && cy[q] < static_cast<long>(h) && cx[q] >= 0 && cx[q] < static_cast<long>(w)) {
      tap.index[q] = static_cast<std::size_t>(cy[q]) * w + static_cast<std::size_t>(cx[q]);
      tap.weight[q] = wts[q];
    }
  }
  return tap;
}

// Sampling positions of every (pixel, tap) pair, shared across channels and
// batch. Layout [h][w][taps].
template <typename T>
struct SamplingPlan {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t taps = 0;
  std::vector<BilinearTap<T>> entries;

  const BilinearTap<T>& at(std::size_t v, std::size_t u, std::size_t k) const {
    return entries[(v * width + u) * taps + k];
  }
};

template <typename T>
SamplingPlan<T> make_sampling_plan(const OffsetField& offsets, unsigned threads = 1) {
  SamplingPlan<T> plan{offsets.height, offsets.width, offsets.taps(),
                       std::vector<BilinearTap<T>>(offsets.offsets.size())};
  parallel_for(offsets.height, threads, [&](std::size_t vb, std::size_t ve) {
    for (std::size_t v = vb; v < ve; ++v)
      for (std::size_t u = 0; u < offsets.width; ++u)
        for (std::size_t k = 0; k < plan.taps; ++k) {
          const TapOffset& o = offsets.at(v, u, k);
          plan.entries[(v * plan.width + u) * plan.taps + k] = make_bilinear_tap<T>(
              offsets.height, offsets.width, static_cast<double>(u) + o.du, static_cast<double>(v) + o.dv);
        }
  });
  return plan;
}

// Integer dilated grid expressed as a plan (single corner, weight one).
template <typename T>
SamplingPlan<T> make_dilated_plan(std::size_t height, std::size_t width, const KernelSpec& spec) {
  spec.validate();
  SamplingPlan<T> plan{height, width, spec.taps(), std::vector<BilinearTap<T>>(height * width * spec.taps())};
  const long d = static_cast<long>(spec.dilation);
  const long hr = static_cast<long>(spec.rows / 2), hc = static_cast<long>(spec.cols / 2);
  for (std::size_t v = 0; v < height; ++v)
    for (std::size_t u = 0; u < width; ++u) {
      std::size_t k = 0;
      for (long i = -hr; i <= hr; ++i)
        for (long j = -hc; j <= hc; ++j, ++k) {
          const long y = static_cast<long>(v) + d * i, x = static_cast<long>(u) + d * j;
          auto& tap = plan.entries[(v * width + u) * plan.taps + k];
          if (y >= 0 && y < static_cast<long>(height) && x >= 0 && x < static_cast<long>(width)) {
            tap.index[0] = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
            tap.weight[0] = T{1};
          }
        }
    }
  return plan;
}

namespace detail {

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const ConvParams<T>& params) {
  require_rank(input, 4, "input");
  params.validate();
  if (params.c_in() != input.dim(1))
    throw Error(Errc::ShapeMismatch, "weights " + shape_str(params.weights.dims()) + " expect " +
                                         std::to_string(params.c_in()) + " input channels, input is " +
                                         shape_str(input.dims()));
  require_finite(input, "input");
}

template <typename T>
void check_offsets(const Tensor<T>& input, const ConvParams<T>& params, const OffsetField& offsets) {
  offsets.validate();
  if (offsets.height != input.dim(2) || offsets.width != input.dim(3))
    throw Error(Errc::ShapeMismatch, "offset field " + std::to_string(offsets.height) + "x" +
                                         std::to_string(offsets.width) + " does not match input " +
                                         shape_str(input.dims()));
  if (offsets.spec.rows != params.rows() || offsets.spec.cols != params.cols())
    throw Error(Errc::ShapeMismatch, "offset taps do not match weight kernel " + shape_str(params.weights.dims()));
}

template <typename T>
void check_plan(const Tensor<T>& input, const ConvParams<T>& params, const SamplingPlan<T>& plan) {
  if (plan.height != input.dim(2) || plan.width != input.dim(3) || plan.taps != params.taps())
    throw Error(Errc::ShapeMismatch, "sampling plan does not match input/weights");
}

template <typename T>
Tensor<T> forward_naive(const Tensor<T>& input, const ConvParams<T>& params, const OffsetField& offsets,
                        unsigned threads) {
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = params.c_out(), taps = params.taps();
  Tensor<T> out({n, co, h, w});
  const auto in = input.data();
  parallel_for(n * co * h, threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t r = rb; r < re; ++r) {
      const std::size_t v = r % h, o = (r / h) % co, b = r / (h * co);
      for (std::size_t u = 0; u < w; ++u) {
        T acc = params.bias[o];
        for (std::size_t c = 0; c < ci; ++c) {
          const auto plane = in.subspan((b * ci + c) * h * w, h * w);
          for (std::size_t k = 0; k < taps; ++k) {
            const TapOffset& off = offsets.at(v, u, k);
            acc += params.weights[(o * ci + c) * taps + k] *
                   bilinear_sample<T>(plane, h, w, static_cast<double>(u) + off.du, static_cast<double>(v) + off.dv);
          }
        }
        out.at(b, o, v, u) = acc;
      }
    }
  });
  return out;
}

}  // namespace detail

// Forward pass over a precomputed plan ("gather" implementation).
template <typename T>
Tensor<T> conv_forward_plan(const Tensor<T>& input, const ConvParams<T>& params, const SamplingPlan<T>& plan,
                            unsigned threads = 1) {
  detail::check_conv_shapes(input, params);
  detail::check_plan(input, params, plan);
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = params.c_out(), taps = params.taps();
  Tensor<T> out({n, co, h, w});
  const auto in = input.data();
  parallel_for(n * co * h, threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t r = rb; r < re; ++r) {
      const std::size_t v = r % h, o = (r / h) % co, b = r / (h * co);
      for (std::size_t u = 0; u < w; ++u) {
        T acc = params.bias[o];
        const BilinearTap<T>* row = &plan.entries[(v * w + u) * taps];
        for (std::size_t c = 0; c < ci; ++c) {
          const T* plane = in.data() + (b * ci + c) * h * w;
          const T* wt = &params.weights[(o * ci + c) * taps];
          for (std::size_t k = 0; k < taps; ++k) {
            const BilinearTap<T>& t = row[k];
            T s{0};
            s += t.weight[0] * plane[t.index[0]];
            s += t.weight[1] * plane[t.index[1]];
            s += t.weight[2] * plane[t.index[2]];
            s += t.weight[3] * plane[t.index[3]];
            acc += wt[k] * s;
          }
        }
        out.at(b, o, v, u) = acc;
      }
    }
  });
  return out;
}

// Exact adjoint of conv_forward_plan. Every accumulator is owned by one
// worker and summed in a fixed order, so results do not depend on `threads`.
template <typename T>
ConvGrads<T> conv_backward_plan(const Tensor<T>& input, const ConvParams<T>& params, const SamplingPlan<T>& plan,
                                const Tensor<T>& grad_output, unsigned threads = 1) {
  detail::check_conv_shapes(input, params);
  detail::check_plan(input, params, plan);
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = params.c_out(), taps = params.taps(), hw = h * w;
  if (grad_output.dims() != Shape{n, co, h, w})
    throw Error(Errc::ShapeMismatch, "grad_output " + shape_str(grad_output.dims()) + " does not match forward output " +
                                         shape_str({n, co, h, w}));
  require_finite(grad_output, "grad_output");

  ConvGrads<T> g{Tensor<T>(input.dims()), Tensor<T>(params.weights.dims()), Tensor<T>(params.bias.dims())};
  const T* in = input.data().data();
  const T* go = grad_output.data().data();

  parallel_for(co, threads, [&](std::size_t ob, std::size_t oe) {
    for (std::size_t o = ob; o < oe; ++o) {
      T acc{0};
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < hw; ++p) acc += go[(b * co + o) * hw + p];
      g.bias[o] = acc;
    }
  });

  parallel_for(co * ci, threads, [&](std::size_t pb, std::size_t pe) {
    std::vector<T> acc(taps);
    for (std::size_t pair = pb; pair < pe; ++pair) {
      const std::size_t o = pair / ci, c = pair % ci;
      std::fill(acc.begin(), acc.end(), T{0});
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = in + (b * ci + c) * hw;
        const T* gplane = go + (b * co + o) * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          const T gv = gplane[p];
          const BilinearTap<T>* row = &plan.entries[p * taps];
          for (std::size_t k = 0; k < taps; ++k) {
            const BilinearTap<T>& t = row[k];
            T s{0};
            s += t.weight[0] * plane[t.index[0]];
            s += t.weight[1] * plane[t.index[1]];
            s += t.weight[2] * plane[t.index[2]];
            s += t.weight[3] * plane[t.index[3]];
            acc[k] += gv * s;
          }
        }
      }
      std::copy(acc.begin(), acc.end(), g.weights.storage().begin() + static_cast<std::ptrdiff_t>(pair * taps));
    }
  });

  parallel_for(n * ci, threads, [&](std::size_t pb, std::size_t pe) {
    for (std::size_t plane_id = pb; plane_id < pe; ++plane_id) {
      const std::size_t b = plane_id / ci, c = plane_id % ci;
      T* gin = g.input.storage().data() + plane_id * hw;
      for (std::size_t o = 0; o < co; ++o) {
        const T* wt = &params.weights[(o * ci + c) * taps];
        const T* gplane = go + (b * co + o) * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          const T gv = gplane[p];
          const BilinearTap<T>* row = &plan.entries[p * taps];
          for (std::size_t k = 0; k < taps; ++k) {
            const T coef = gv * wt[k];
            const BilinearTap<T>& t = row[k];
            gin[t.index[0]] += coef * t.weight[0];
            gin[t.index[1]] += coef * t.weight[1];
            gin[t.index[2]] += coef * t.weight[2];
            gin[t.index[3]] += coef * t.weight[3];
          }
        }
      }
    }
  });
  return g;
}

// out[n][o][v][u] = bias[o] + sum_c sum_k w[o][c][k] * sample(input[n][c], (u, v) + offset_k(u, v))
template <typename T>
Tensor<T> pac_conv_forward(const Tensor<T>& input, const ConvParams<T>& params, const OffsetField& offsets,
                           const ConvOptions& opts = {}) {
  detail::check_conv_shapes(input, params);
  detail::check_offsets(input, params, offsets);
  if (opts.impl == ConvImpl::Naive) return detail::forward_naive(input, params, offsets, opts.threads);
  return conv_forward_plan(input, params, make_sampling_plan<T>(offsets, opts.threads), opts.threads);
}

// Offsets are constants of the operator, so there is no offset gradient.
template <typename T>
ConvGrads<T> pac_conv_backward(const Tensor<T>& input, const ConvParams<T>& params, const OffsetField& offsets,
                               const Tensor<T>& grad_output, unsigned threads = 1) {
  detail::check_conv_shapes(input, params);
  detail::check_offsets(input, params, offsets);
  return conv_backward_plan(input, params, make_sampling_plan<T>(offsets, threads), grad_output, threads);
}

// Zero-padded, stride-1, "same"-size dilated cross-correlation.
template <typename T>
Tensor<T> standard_conv_forward(const Tensor<T>& input, const ConvParams<T>& params, std::size_t dilation,
                                unsigned threads = 1) {
  detail::check_conv_shapes(input, params);
  if (dilation == 0) throw Error(Errc::InvalidArgument, "dilation must be >= 1");
  KernelSpec{params.rows(), params.cols(), dilation}.validate();
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = params.c_out(), rows = params.rows(), cols = params.cols();
  const long d = static_cast<long>(dilation), hr = static_cast<long>(rows / 2), hc = static_cast<long>(cols / 2);
  Tensor<T> out({n, co, h, w});
  parallel_for(n * co * h, threads, [&](std::size_t rb, std::size_t re) {
    for (std::size_t r = rb; r < re; ++r) {
      const std::size_t v = r % h, o = (r / h) % co, b = r / (h * co);
      for (std::size_t u = 0; u < w; ++u) {
        T acc = params.bias[o];
        for (std::size_t c = 0; c < ci; ++c) {
          for (long i = -hr; i <= hr; ++i) {
            const long y = static_cast<long>(v) + d * i;
            for (long j = -hc; j <= hc; ++j) {
              const long x = static_cast<long>(u) + d * j;
              if (y < 0 || y >= static_cast<long>(h) || x < 0 || x >= static_cast<long>(w)) continue;
              acc += params.weights.at(o, c, static_cast<std::size_t>(i + hr), static_cast<std::size_t>(j + hc)) *
                     input.at(b, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            }
          }
        }
        out.at(b, o, v, u) = acc;
      }
    }
  });
  return out;
}

template <typename T>
ConvGrads<T> standard_conv_backward(const Tensor<T>& input, const ConvParams<T>& params, std::size_t dilation,
                                    const Tensor<T>& grad_output, unsigned threads = 1) {
  detail::check_conv_shapes(input, params);
  const auto plan = make_dilated_plan<T>(input.dim(2), input.dim(3), {params.rows(), params.cols(), dilation});
  return conv_backward_plan(input, params, plan, grad_output, threads);
}

}  // namespace pac

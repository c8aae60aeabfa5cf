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
#include <string>
#include <vector>

#include "pac/camera_geometry.hpp"
#include "pac/error.hpp"
#include "pac/parallel.hpp"

namespace pac {

struct KernelSpec {
  std::size_t rows = 3;
  std::size_t cols = 3;
  std::size_t dilation = 1;

  std::size_t taps() const noexcept { return rows * cols; }

  void validate() const {
    if (rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0)
      throw Error(Errc::InvalidArgument, "kernel rows and cols must be odd and positive");
    if (dilation == 0) throw Error(Errc::InvalidArgument, "dilation must be >= 1");
  }
};

struct TapOffset {
  double du = 0.0;
  double dv = 0.0;

  friend bool operator==(const TapOffset&, const TapOffset&) = default;
};

// Sheared tap grid for one pixel: kernel rows stay horizontal while the
// column axis follows the depth-axis direction (cos phi, sin phi).
//   offset(i, j) = dilation * (j * (1, 0) + i * (cos phi, sin phi))
// Taps are row-major over i in [-(rows-1)/2, (rows-1)/2], then j.
// At phi = +pi/2 this is the ordinary dilated grid.
inline std::vector<TapOffset> kernel_offsets(double phi, const KernelSpec& spec) {
  spec.validate();
  const double c = std::cos(phi), s = std::sin(phi);
  const double d = static_cast<double>(spec.dilation);
  const auto half_r = static_cast<long>(spec.rows / 2), half_c = static_cast<long>(spec.cols / 2);
  std::vector<TapOffset> taps;
  taps.reserve(spec.taps());
  for (long i = -half_r; i <= half_r; ++i) {
    for (long j = -half_c; j <= half_c; ++j) {
      const double fi = static_cast<double>(i), fj = static_cast<double>(j);
      taps.push_back({d * (fj + fi * c), d * (fi * s)});
    }
  }
  return taps;
}

// Per-pixel tap displacements, stored [height][width][taps] as (du, dv).
struct OffsetField {
  std::size_t width = 0;
  std::size_t height = 0;
  KernelSpec spec;
  std::vector<TapOffset> offsets;

  std::size_t taps() const noexcept { return spec.taps(); }

  const TapOffset& at(std::size_t v, std::size_t u, std::size_t tap) const {
    return offsets[(v * width + u) * taps() + tap];
  }

  void validate() const {
    spec.validate();
    if (width == 0 || height == 0) throw Error(Errc::InvalidDimensions, "offset field must be non-empty");
    if (offsets.size() != width * height * taps())
      throw Error(Errc::ShapeMismatch, "offset field storage does not match " + std::to_string(height) + "x" +
                                           std::to_string(width) + "x" + std::to_string(taps()));
    for (const auto& o : offsets)
      if (!std::isfinite(o.du) || !std::isfinite(o.dv)) throw Error(Errc::NonFiniteInput, "non-finite tap offset");
  }
};

inline OffsetField build_offset_field(const geometry::AngleField& angles, const KernelSpec& spec,
                                      unsigned threads = 1) {
  if (angles.width == 0 || angles.height == 0) throw Error(Errc::InvalidDimensions, "angle field must be non-empty");
  angles.validate();
  spec.validate();
  OffsetField field{angles.width, angles.height, spec, std::vector<TapOffset>(angles.phi.size() * spec.taps())};
  parallel_for(angles.phi.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto taps = kernel_offsets(angles.phi[p], spec);
      std::copy(taps.begin(), taps.end(), field.offsets.begin() + static_cast<std::ptrdiff_t>(p * spec.taps()));
    }
  });
  return field;
}

// Same offsets at every pixel; convenient for tests and the uniform-angle case.
inline OffsetField uniform_offset_field(std::size_t width, std::size_t height, double phi, const KernelSpec& spec) {
  return build_offset_field(geometry::AngleField::uniform(width, height, phi), spec);
}

}  // namespace pac

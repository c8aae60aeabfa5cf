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
#include <numbers>
#include <string>
#include <vector>

#include "pac/error.hpp"
#include "pac/parallel.hpp"

// Pinhole camera math used to derive per-pixel depth-axis directions.
//
// Conventions: camera X right, Y down, Z forward; pixel u is the column and
// v the row, both measured from the top-left pixel with no half-pixel
// offset. Everything here is f64 regardless of the feature-map dtype.
namespace pac::geometry {

inline constexpr double kFallbackAngle = std::numbers::pi / 2.0;
inline constexpr double kDefaultHorizonEpsilon = 1.0;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if (!(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0))
      throw Error(Errc::InvalidArgument, "focal lengths must be finite and positive");
    if (!(std::isfinite(cx) && std::isfinite(cy)))
      throw Error(Errc::InvalidArgument, "principal point must be finite");
  }

  // Intrinsics for a feature map downsampled by `stride`.
  CameraIntrinsics scaled(double stride) const {
    if (!(stride > 0.0) || !std::isfinite(stride)) throw Error(Errc::InvalidArgument, "stride must be positive");
    return {fx / stride, fy / stride, cx / stride, cy / stride};
  }
};

struct CameraPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct GroundPlane {
  double y0 = 1.65;

  void validate() const {
    if (!std::isfinite(y0) || y0 == 0.0) throw Error(Errc::InvalidArgument, "ground height must be finite and non-zero");
  }
};

struct DepthGradient {
  double du_dz = 0.0;
  double dv_dz = 0.0;
};

inline PixelCoord project(const CameraPoint& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0)) throw Error(Errc::DepthNotPositive, "cannot project point with z = " + std::to_string(p.z));
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

// Intersects the viewing ray of `pixel` with the plane Y = g.y0. Pixels above
// the horizon give Z < 0; the algebraic result is returned unchanged.
inline CameraPoint backproject_ground(const PixelCoord& pixel, const CameraIntrinsics& k, const GroundPlane& g) {
  const double dv = pixel.v - k.cy;
  if (dv == 0.0) throw Error(Errc::HorizonSingularity, "pixel lies on the horizon row v = cy");
  return {(pixel.u - k.cx) * g.y0 * k.fy / (dv * k.fx), g.y0, g.y0 * k.fy / dv};
}

// Image-plane velocity of a point as its depth changes with X, Y held fixed.
inline DepthGradient depth_derivative(const CameraPoint& p, const CameraIntrinsics& k) {
  if (p.z == 0.0) throw Error(Errc::DepthNotPositive, "depth derivative undefined at z = 0");
  const double z2 = p.z * p.z;
  return {-p.x * k.fx / z2, -p.y * k.fy / z2};
}

// Direction of the depth axis through `pixel`, in (-pi, pi], assuming the
// pixel images a ground-plane point. Below the horizon this points at the
// principal point.
inline double perspective_angle(const PixelCoord& pixel, const CameraIntrinsics& k, const GroundPlane& g,
                                double horizon_epsilon = kDefaultHorizonEpsilon) {
  if (std::abs(pixel.v - k.cy) < horizon_epsilon)
    throw Error(Errc::HorizonSingularity, "pixel row " + std::to_string(pixel.v) + " is inside the horizon band");
  const DepthGradient grad = depth_derivative(backproject_ground(pixel, k, g), k);
  return std::atan2(grad.dv_dz, grad.du_dz);
}

enum class AboveHorizon { Verbatim, Fallback };

struct AngleFieldOptions {
  double horizon_epsilon = kDefaultHorizonEpsilon;
  AboveHorizon above_horizon = AboveHorizon::Verbatim;
  unsigned threads = 1;
};

// Per-pixel perspective angle, row-major [height][width]. Pixels without a
// usable angle hold kFallbackAngle and valid == 0.
struct AngleField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> phi;
  std::vector<unsigned char> valid;

  double angle(std::size_t v, std::size_t u) const { return phi[v * width + u]; }
  bool is_valid(std::size_t v, std::size_t u) const { return valid[v * width + u] != 0; }

  void validate() const {
    if (width == 0 || height == 0) throw Error(Errc::InvalidDimensions, "angle field must be non-empty");
    if (phi.size() != width * height || valid.size() != width * height)
      throw Error(Errc::ShapeMismatch, "angle field storage does not match its dimensions");
  }

  static AngleField uniform(std::size_t width, std::size_t height, double angle) {
    AngleField f{width, height, std::vector<double>(width * height, angle),
                 std::vector<unsigned char>(width * height, 1)};
    f.validate();
    return f;
  }
};

inline AngleField angle_field(std::size_t width, std::size_t height, const CameraIntrinsics& k, const GroundPlane& g,
                              const AngleFieldOptions& opts = {}) {
  if (width == 0 || height == 0)
    throw Error(Errc::InvalidDimensions,
                "angle field needs width, height >= 1 (got " + std::to_string(width) + "x" + std::to_string(height) + ")");
  if (!(opts.horizon_epsilon > 0.0)) throw Error(Errc::InvalidArgument, "horizon epsilon must be positive");
  k.validate();
  g.validate();

  AngleField field{width, height, std::vector<double>(width * height, kFallbackAngle),
                   std::vector<unsigned char>(width * height, 0)};
  parallel_for(height, opts.threads, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t v = row_begin; v < row_end; ++v) {
      const double dv = static_cast<double>(v) - k.cy;
      if (std::abs(dv) < opts.horizon_epsilon) continue;
      // "Above" means the ground-plane backprojection lands behind the camera.
      const bool behind_camera = (g.y0 * dv) < 0.0;
      if (behind_camera && opts.above_horizon == AboveHorizon::Fallback) continue;
      for (std::size_t u = 0; u < width; ++u) {
        const PixelCoord p{static_cast<double>(u), static_cast<double>(v)};
        field.phi[v * width + u] = perspective_angle(p, k, g, opts.horizon_epsilon);
        field.valid[v * width + u] = 1;
      }
    }
  });
  return field;
}

}  // namespace pac::geometry

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
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pac/camera_geometry.hpp"
#include "pac/offset_field.hpp"
#include "pac/perspective_conv.hpp"
#include "pac/random.hpp"

namespace pac::bench {

struct BenchConfig {
  std::size_t n = 1, c_in = 16, h = 128, w = 128;
  std::size_t c_out = 16;
  std::size_t dilation = 2;
  std::size_t repeat = 3;
  unsigned threads = 1;
  std::vector<ConvImpl> impls{ConvImpl::Naive, ConvImpl::Gather};
  std::uint64_t seed = 1234;
};

struct BenchReport {
  std::string impl;
  std::size_t n = 0, c_in = 0, c_out = 0, h = 0, w = 0, taps = 0, reps = 0;
  double ns_min = 0, ns_median = 0, ns_max = 0;
  double checksum = 0;
};

inline const char* impl_name(ConvImpl impl) { return impl == ConvImpl::Naive ? "naive" : "gather"; }

inline std::vector<BenchReport> run(const BenchConfig& cfg) {
  if (cfg.n == 0 || cfg.c_in == 0 || cfg.h == 0 || cfg.w == 0 || cfg.c_out == 0 || cfg.repeat == 0)
    throw Error(Errc::InvalidArgument, "benchmark sizes and repeat must be >= 1");
  // Synthetic camera with the horizon a third of the way down the map.
  const geometry::CameraIntrinsics k{static_cast<double>(cfg.w), static_cast<double>(cfg.w),
                                     static_cast<double>(cfg.w) / 2.0, static_cast<double>(cfg.h) / 3.0};
  const auto angles = geometry::angle_field(cfg.w, cfg.h, k, {1.65}, {.threads = cfg.threads});
  const KernelSpec spec{3, 3, cfg.dilation};
  const OffsetField offsets = build_offset_field(angles, spec, cfg.threads);

  SplitMix64 rng(cfg.seed);
  const auto input = random_tensor<double>({cfg.n, cfg.c_in, cfg.h, cfg.w}, rng);
  const ConvParams<double> params{random_tensor<double>({cfg.c_out, cfg.c_in, 3, 3}, rng),
                                  random_tensor<double>({cfg.c_out}, rng)};

  std::vector<BenchReport> reports;
  for (ConvImpl impl : cfg.impls) {
    std::vector<double> times;
    Tensor<double> out;
    for (std::size_t r = 0; r < cfg.repeat; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      out = pac_conv_forward(input, params, offsets, {impl, cfg.threads});
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    }
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size();
    const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
    reports.push_back({impl_name(impl), cfg.n, cfg.c_in, cfg.c_out, cfg.h, cfg.w, spec.taps(), cfg.repeat, times.front(),
                       median, times.back(), checksum(out)});
  }
  return reports;
}

inline std::string format_text(const std::vector<BenchReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-18s %6s %5s %5s %14s %14s %14s %24s\n", "impl", "shape(NCHW)", "c_out",
                "taps", "reps", "ns_min", "ns_median", "ns_max", "checksum");
  os << line;
  for (const auto& r : reports) {
    const std::string shape = std::to_string(r.n) + "x" + std::to_string(r.c_in) + "x" + std::to_string(r.h) + "x" +
                              std::to_string(r.w);
    std::snprintf(line, sizeof line, "%-8s %-18s %6zu %5zu %5zu %14.0f %14.0f %14.0f %24.17g\n", r.impl.c_str(),
                  shape.c_str(), r.c_out, r.taps, r.reps, r.ns_min, r.ns_median, r.ns_max, r.checksum);
    os << line;
  }
  return os.str();
}

inline std::string format_csv(const std::vector<BenchReport>& reports) {
  std::ostringstream os;
  os << "impl,n,c_in,c_out,h,w,taps,reps,ns_min,ns_median,ns_max,checksum\n";
  char line[256];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%zu,%zu,%zu,%zu,%zu,%.0f,%.0f,%.0f,%.17g\n", r.impl.c_str(), r.n,
                  r.c_in, r.c_out, r.h, r.w, r.taps, r.reps, r.ns_min, r.ns_median, r.ns_max, r.checksum);
    os << line;
  }
  return os.str();
}

}  // namespace pac::bench

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
// Computes a stride-8 angle field for a KITTI camera, runs the default PAC
// module on a random feature map and prints a few depth-axis directions.
#include <cmath>
#include <cstdio>
#include <numbers>

#include "pac/pac.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <kitti_calib.txt>\n", argv[0]);
    return 1;
  }
  try {
    const auto k = pac::io::load_kitti_calib(argv[1]).scaled(8.0);
    const std::size_t w = 160, h = 48;
    const auto angles = pac::geometry::angle_field(w, h, k, {1.65});

    for (std::size_t v : {h / 2, h - 1})
      for (std::size_t u : {std::size_t{0}, w / 2, w - 1})
        std::printf("pixel (%3zu, %2zu)  phi = %+8.3f deg%s\n", u, v, angles.angle(v, u) * 180.0 / std::numbers::pi,
                    angles.is_valid(v, u) ? "" : "  (horizon fallback)");

    pac::PacModuleConfig config;
    config.c_in = config.c_mid = config.c_out = 8;
    config.seed = 42;
    const auto params = pac::init_params<float>(config);
    pac::SplitMix64 rng(7);
    const auto features = pac::random_tensor<float>({1, 8, h, w}, rng);
    const auto out = pac::pac_module_forward(features, params, config, angles, pac::resolve_threads(0));
    std::printf("module output %s, checksum %.6f\n", pac::shape_str(out.dims()).c_str(), pac::checksum(out));
  } catch (const pac::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

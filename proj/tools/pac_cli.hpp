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
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "pac/pac.hpp"

// `pac` command-line frontend. Exit codes: 0 success, 1 usage, 2 data/format.
namespace pac::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace fs = std::filesystem;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline void write_angle_outputs(const geometry::AngleField& field, const std::string& out, const std::string& ppm) {
  Tensor<double> phi({field.height, field.width}, field.phi);
  Tensor<double> mask({field.height, field.width});
  for (std::size_t i = 0; i < field.valid.size(); ++i) mask[i] = field.valid[i] ? 1.0 : 0.0;
  io::save_pact(phi, out);
  io::save_pact(mask, out + ".mask");
  if (!ppm.empty()) {
    std::ofstream f(ppm, std::ios::binary);
    if (!f) throw Error(Errc::IoError, "cannot open " + ppm + " for writing");
    io::write_angle_ppm(field, f);
  }
}

// Rebuilds an AngleField from `<path>` and, when present, `<path>.mask`.
inline geometry::AngleField read_angle_field(const std::string& path) {
  const auto phi = io::load_pact_as<double>(path);
  if (phi.rank() != 2) throw Error(Errc::ShapeMismatch, "angle tensor must be [H, W], got " + shape_str(phi.dims()));
  geometry::AngleField field{phi.dim(1), phi.dim(0), phi.storage(), std::vector<unsigned char>(phi.size(), 1)};
  if (fs::exists(path + ".mask")) {
    const auto mask = io::load_pact_as<double>(path + ".mask");
    if (mask.dims() != phi.dims())
      throw Error(Errc::ShapeMismatch, "mask " + shape_str(mask.dims()) + " does not match angles " + shape_str(phi.dims()));
    for (std::size_t i = 0; i < mask.size(); ++i) {
      field.valid[i] = mask[i] != 0.0;
      if (!field.valid[i]) field.phi[i] = geometry::kFallbackAngle;
    }
  }
  field.validate();
  return field;
}

inline Tensor<double> offsets_to_tensor(const OffsetField& f) {
  Tensor<double> t({f.height, f.width, f.taps(), 2});
  for (std::size_t i = 0; i < f.offsets.size(); ++i) {
    t[2 * i] = f.offsets[i].du;
    t[2 * i + 1] = f.offsets[i].dv;
  }
  return t;
}

inline OffsetField tensor_to_offsets(const Tensor<double>& t, std::size_t rows, std::size_t cols) {
  if (t.rank() != 4 || t.dim(3) != 2)
    throw Error(Errc::ShapeMismatch, "offset tensor must be [H, W, taps, 2], got " + shape_str(t.dims()));
  if (t.dim(2) != rows * cols)
    throw Error(Errc::ShapeMismatch, "offset tensor has " + std::to_string(t.dim(2)) + " taps, kernel has " +
                                         std::to_string(rows * cols));
  OffsetField f{t.dim(1), t.dim(0), {rows, cols, 1}, std::vector<TapOffset>(t.size() / 2)};
  for (std::size_t i = 0; i < f.offsets.size(); ++i) f.offsets[i] = {t[2 * i], t[2 * i + 1]};
  f.validate();
  return f;
}

template <typename T>
ConvParams<T> load_conv_params(const std::string& weights_path, const std::string& bias_path) {
  auto weights = io::load_pact_as<T>(weights_path);
  require_rank(weights, 4, "weights");
  Tensor<T> bias = bias_path.empty() ? Tensor<T>({weights.dim(0)}) : io::load_pact_as<T>(bias_path);
  return {std::move(weights), std::move(bias)};
}

inline std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> values;
  if (text.empty() || text == "none") return values;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < 1) throw CLI::ValidationError("list", "'" + text + "' is not a list of positive integers");
    values.push_back(static_cast<std::size_t>(v));
  }
  return values;
}

}  // namespace detail

inline int run(std::vector<std::string> args, Streams io_streams = {std::cout, std::cerr}) {
  auto& out = io_streams.out;
  auto& err = io_streams.err;

  CLI::App app{"Perspective-aware convolution toolkit"};
  app.require_subcommand(1);

  // angle-field
  std::string af_calib, af_out, af_ppm, af_above = "verbatim";
  std::size_t af_width = 0, af_height = 0;
  double af_y0 = 0.0, af_stride = 1.0, af_eps = geometry::kDefaultHorizonEpsilon;
  auto* angle_cmd = app.add_subcommand("angle-field", "Per-pixel perspective angles from a KITTI calibration");
  angle_cmd->add_option("--calib", af_calib, "KITTI calibration file")->required();
  angle_cmd->add_option("--width", af_width, "Grid width")->required()->check(CLI::PositiveNumber);
  angle_cmd->add_option("--height", af_height, "Grid height")->required()->check(CLI::PositiveNumber);
  angle_cmd->add_option("--ground-y", af_y0, "Ground plane height Y0 (m, camera Y down)")->required();
  angle_cmd->add_option("--stride", af_stride, "Divide intrinsics by this stride")->check(CLI::PositiveNumber);
  angle_cmd->add_option("--horizon-eps", af_eps, "Horizon band half-width (pixels)")->check(CLI::PositiveNumber);
  angle_cmd->add_option("--above-horizon", af_above, "verbatim|fallback")
      ->check(CLI::IsMember({"verbatim", "fallback"}));
  angle_cmd->add_option("--out", af_out, "Output PACT file ([H, W] f64); mask goes to <out>.mask")->required();
  angle_cmd->add_option("--ppm", af_ppm, "Optional PPM visualization");

  // offsets
  std::string off_angles, off_out;
  std::size_t off_dilation = 1, off_rows = 3, off_cols = 3;
  auto* offsets_cmd = app.add_subcommand("offsets", "Sheared kernel offsets from an angle field");
  offsets_cmd->add_option("--angles", off_angles, "Angle PACT file")->required();
  offsets_cmd->add_option("--dilation", off_dilation, "Dilation")->required()->check(CLI::PositiveNumber);
  offsets_cmd->add_option("--rows", off_rows, "Kernel rows (odd)")->check(CLI::PositiveNumber);
  offsets_cmd->add_option("--cols", off_cols, "Kernel cols (odd)")->check(CLI::PositiveNumber);
  offsets_cmd->add_option("--out", off_out, "Output PACT file [H, W, taps, 2]")->required();

  // conv / conv-std
  std::string cv_input, cv_weights, cv_bias, cv_offsets, cv_impl = "gather", cv_out;
  std::size_t cv_dilation = 1;
  unsigned threads = 0;
  auto* conv_cmd = app.add_subcommand("conv", "Perspective-aware convolution forward pass");
  conv_cmd->add_option("--input", cv_input, "Input PACT [N, C, H, W]")->required();
  conv_cmd->add_option("--weights", cv_weights, "Weights PACT [C_out, C_in, R, S]")->required();
  conv_cmd->add_option("--bias", cv_bias, "Bias PACT [C_out]");
  conv_cmd->add_option("--offsets", cv_offsets, "Offsets PACT [H, W, taps, 2]")->required();
  conv_cmd->add_option("--impl", cv_impl, "naive|gather")->check(CLI::IsMember({"naive", "gather"}));
  conv_cmd->add_option("--out", cv_out, "Output PACT")->required();
  conv_cmd->add_option("--threads", threads, "Worker threads (default PAC_THREADS or all cores)");

  auto* conv_std_cmd = app.add_subcommand("conv-std", "Standard dilated convolution forward pass");
  conv_std_cmd->add_option("--input", cv_input, "Input PACT [N, C, H, W]")->required();
  conv_std_cmd->add_option("--weights", cv_weights, "Weights PACT [C_out, C_in, R, S]")->required();
  conv_std_cmd->add_option("--bias", cv_bias, "Bias PACT [C_out]");
  conv_std_cmd->add_option("--dilation", cv_dilation, "Dilation")->check(CLI::PositiveNumber);
  conv_std_cmd->add_option("--out", cv_out, "Output PACT")->required();
  conv_std_cmd->add_option("--threads", threads, "Worker threads (default PAC_THREADS or all cores)");

  // module
  std::string md_input, md_calib, md_dilations = "2,4,6,8", md_params, md_out;
  double md_y0 = 0.0;
  std::uint64_t md_seed = 0;
  auto* module_cmd = app.add_subcommand("module", "Multi-branch PAC module forward pass");
  module_cmd->add_option("--input", md_input, "Input PACT [N, C, H, W]")->required();
  module_cmd->add_option("--calib", md_calib, "KITTI calibration file")->required();
  module_cmd->add_option("--ground-y", md_y0, "Ground plane height Y0")->required();
  module_cmd->add_option("--dilations", md_dilations, "Perspective branch dilations, comma separated ('none' for none)");
  module_cmd->add_option("--seed", md_seed, "Parameter init seed");
  module_cmd->add_option("--params", md_params, "Parameter directory (loaded if it has a manifest, else written)");
  module_cmd->add_option("--out", md_out, "Output PACT")->required();
  module_cmd->add_option("--threads", threads, "Worker threads (default PAC_THREADS or all cores)");

  // gradcheck
  std::uint64_t gc_seed = 0;
  double gc_eps = 0.0;
  std::string gc_dtype = "f64";
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of the backward passes");
  gradcheck_cmd->add_option("--seed", gc_seed, "Random seed");
  auto* eps_opt = gradcheck_cmd->add_option("--eps", gc_eps, "Central-difference step");
  gradcheck_cmd->add_option("--dtype", gc_dtype, "f64|f32")->check(CLI::IsMember({"f64", "f32"}));
  gradcheck_cmd->add_option("--threads", threads, "Worker threads");

  // bench
  std::string bn_shape, bn_impl = "both", bn_csv;
  bench::BenchConfig bn;
  auto* bench_cmd = app.add_subcommand("bench", "Time naive vs gather forward implementations");
  bench_cmd->add_option("--shape", bn_shape, "N,C,H,W")->required();
  bench_cmd->add_option("--c-out", bn.c_out, "Output channels")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--dilation", bn.dilation, "Dilation")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeat", bn.repeat, "Repetitions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads", threads, "Worker threads (default PAC_THREADS or all cores)");
  bench_cmd->add_option("--impl", bn_impl, "naive|gather|both")->check(CLI::IsMember({"naive", "gather", "both"}));
  bench_cmd->add_option("--csv", bn_csv, "Also write the report as CSV");

  std::vector<std::size_t> bench_shape, module_dilations;
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (bench_cmd->parsed()) {
      bench_shape = detail::parse_list(bn_shape);
      if (bench_shape.size() != 4) throw CLI::ValidationError("--shape", "expected N,C,H,W");
    }
    if (module_cmd->parsed()) module_dilations = detail::parse_list(md_dilations);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::Error& e) {
    err << "pac: " << e.what() << "\n";
    return kExitUsage;
  }

  const unsigned nthreads = resolve_threads(threads);
  try {
    if (angle_cmd->parsed()) {
      const auto k = io::load_kitti_calib(af_calib).scaled(af_stride);
      const geometry::AngleFieldOptions opts{
          af_eps, af_above == "fallback" ? geometry::AboveHorizon::Fallback : geometry::AboveHorizon::Verbatim,
          nthreads};
      const auto field = geometry::angle_field(af_width, af_height, k, {af_y0}, opts);
      detail::write_angle_outputs(field, af_out, af_ppm);
      const auto valid = std::count(field.valid.begin(), field.valid.end(), 1);
      out << "angle field " << af_width << "x" << af_height << ": " << valid << " valid pixels -> " << af_out << "\n";
    } else if (offsets_cmd->parsed()) {
      const auto angles = detail::read_angle_field(off_angles);
      const auto field = build_offset_field(angles, {off_rows, off_cols, off_dilation}, nthreads);
      io::save_pact(detail::offsets_to_tensor(field), off_out);
      out << "offsets " << angles.height << "x" << angles.width << "x" << field.taps() << " -> " << off_out << "\n";
    } else if (conv_cmd->parsed() || conv_std_cmd->parsed()) {
      const bool perspective = conv_cmd->parsed();
      auto input_any = io::load_pact(cv_input);
      std::visit(
          [&](const auto& input) {
            using T = typename std::decay_t<decltype(input)>::value_type;
            const auto params = detail::load_conv_params<T>(cv_weights, cv_bias);
            Tensor<T> result;
            if (perspective) {
              const auto offsets = detail::tensor_to_offsets(io::load_pact_as<double>(cv_offsets), params.rows(),
                                                             params.cols());
              result = pac_conv_forward(input, params, offsets,
                                        {cv_impl == "naive" ? ConvImpl::Naive : ConvImpl::Gather, nthreads});
            } else {
              result = standard_conv_forward(input, params, cv_dilation, nthreads);
            }
            io::save_pact(result, cv_out);
            out << (perspective ? "conv " : "conv-std ") << shape_str(result.dims()) << " -> " << cv_out << "\n";
          },
          input_any);
    } else if (module_cmd->parsed()) {
      auto input_any = io::load_pact(md_input);
      std::visit(
          [&](const auto& input) {
            using T = typename std::decay_t<decltype(input)>::value_type;
            require_rank(input, 4, "input");
            PacModuleConfig config;
            PacModuleParams<T> params;
            if (!md_params.empty() && fs::exists(fs::path(md_params) / io::kManifestName)) {
              std::tie(config, params) = io::load_module_params<T>(md_params);
            } else {
              config.branches = {{BranchKind::Standard, 1}};
              for (std::size_t d : module_dilations) config.branches.push_back({BranchKind::Perspective, d});
              config.c_in = config.c_mid = config.c_out = input.dim(1);
              config.seed = md_seed;
              params = init_params<T>(config);
              if (!md_params.empty()) io::save_module_params(md_params, config, params);
            }
            const auto k = io::load_kitti_calib(md_calib);
            const auto angles = geometry::angle_field(input.dim(3), input.dim(2), k, {md_y0}, {.threads = nthreads});
            const auto result = pac_module_forward(input, params, config, angles, nthreads);
            io::save_pact(result, md_out);
            out << "module (" << config.branches.size() << " branches) " << shape_str(result.dims()) << " -> "
                << md_out << "\n";
          },
          input_any);
    } else if (gradcheck_cmd->parsed()) {
      const bool f32 = gc_dtype == "f32";
      const double eps = eps_opt->count() ? gc_eps : (f32 ? gradcheck::default_eps<float>() : gradcheck::default_eps<double>());
      std::vector<gradcheck::Report> reports;
      if (f32) {
        reports.push_back(gradcheck::conv_gradcheck<float>(gc_seed, eps, nthreads));
        reports.push_back(gradcheck::module_gradcheck<float>(gc_seed, eps, nthreads));
      } else {
        reports.push_back(gradcheck::conv_gradcheck<double>(gc_seed, eps, nthreads));
        reports.push_back(gradcheck::module_gradcheck<double>(gc_seed, eps, nthreads));
      }
      bool ok = true;
      char line[160];
      for (const auto& r : reports) {
        for (const auto& g : r.groups) {
          std::snprintf(line, sizeof line, "%-24s n=%-5zu max_rel_err=%.6e\n", g.name.c_str(), g.count, g.max_rel_error);
          out << line;
        }
        ok = ok && r.passed();
      }
      std::snprintf(line, sizeof line, "gradcheck %s (dtype %s, eps %g, tolerance %g)\n", ok ? "PASSED" : "FAILED",
                    gc_dtype.c_str(), eps, reports.front().tolerance);
      out << line;
      return ok ? kExitOk : kExitData;
    } else if (bench_cmd->parsed()) {
      bn.n = bench_shape[0];
      bn.c_in = bench_shape[1];
      bn.h = bench_shape[2];
      bn.w = bench_shape[3];
      bn.threads = nthreads;
      if (bn_impl == "naive")
        bn.impls = {ConvImpl::Naive};
      else if (bn_impl == "gather")
        bn.impls = {ConvImpl::Gather};
      const auto reports = bench::run(bn);
      out << bench::format_text(reports);
      if (!bn_csv.empty()) {
        std::ofstream f(bn_csv);
        if (!f) throw Error(Errc::IoError, "cannot open " + bn_csv + " for writing");
        f << bench::format_csv(reports);
      }
      for (const auto& r : reports)
        if (std::abs(r.checksum - reports.front().checksum) > 1e-10) {
          err << "pac: checksum mismatch between " << reports.front().impl << " and " << r.impl << "\n";
          return kExitData;
        }
    }
  } catch (const Error& e) {
    err << "pac: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "pac: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}

}  // namespace pac::cli

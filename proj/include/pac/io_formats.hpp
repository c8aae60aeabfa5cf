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
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "pac/camera_geometry.hpp"
#include "pac/error.hpp"
#include "pac/pac_module.hpp"
#include "pac/tensor.hpp"

namespace pac::io {

// ---------------------------------------------------------------------------
// PACT tensor container
//
//   offset 0  "PACT"
//          4  version (1)
//          5  dtype   (1 = f32, 2 = f64)
//          6  rank
//          7  pad     (0)
//          8  rank x u64 dims, little-endian
//          .. payload, row-major, little-endian IEEE-754
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kPactMagic{'P', 'A', 'C', 'T'};
inline constexpr std::uint8_t kPactVersion = 1;
inline constexpr std::size_t kPactPreludeBytes = 8;

enum class Dtype : std::uint8_t { F32 = 1, F64 = 2 };

template <typename T>
constexpr Dtype dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>, "PACT stores f32 or f64");
  return std::is_same_v<T, float> ? Dtype::F32 : Dtype::F64;
}

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <typename T>
using bits_t = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
Tensor<T> decode_payload(Shape dims, const std::uint8_t* p) {
  std::vector<T> data(shape_numel(dims));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::bit_cast<T>(get_le<bits_t<T>>(p + i * sizeof(T)));
  return Tensor<T>(std::move(dims), std::move(data));
}

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_pact(const Tensor<T>& t) {
  if (t.rank() > 255) throw Error(Errc::InvalidArgument, "PACT rank is limited to 255");
  std::vector<std::uint8_t> out;
  out.reserve(kPactPreludeBytes + 8 * t.rank() + sizeof(T) * t.size());
  out.insert(out.end(), kPactMagic.begin(), kPactMagic.end());
  out.push_back(kPactVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  out.push_back(0);
  for (std::size_t d : t.dims()) detail::put_le<std::uint64_t>(out, d);
  for (T v : t.data()) detail::put_le(out, std::bit_cast<detail::bits_t<T>>(v));
  return out;
}

inline AnyTensor decode_pact(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kPactMagic.data(), 4) != 0)
    throw Error(Errc::BadMagic, "not a PACT stream");
  if (bytes.size() < kPactPreludeBytes) throw Error(Errc::TruncatedPayload, "PACT header is truncated");
  if (bytes[4] != kPactVersion) throw Error(Errc::UnsupportedVersion, "PACT version " + std::to_string(bytes[4]));
  const std::uint8_t dtype = bytes[5];
  if (dtype != static_cast<std::uint8_t>(Dtype::F32) && dtype != static_cast<std::uint8_t>(Dtype::F64))
    throw Error(Errc::UnknownDtype, "PACT dtype code " + std::to_string(dtype));
  const std::size_t rank = bytes[6];
  if (bytes.size() < kPactPreludeBytes + 8 * rank) throw Error(Errc::TruncatedPayload, "PACT dims are truncated");
  Shape dims(rank);
  for (std::size_t i = 0; i < rank; ++i) dims[i] = detail::get_le<std::uint64_t>(bytes.data() + kPactPreludeBytes + 8 * i);

  const std::size_t elem = dtype == static_cast<std::uint8_t>(Dtype::F32) ? 4 : 8;
  const std::size_t offset = kPactPreludeBytes + 8 * rank;
  const std::size_t available = (bytes.size() - offset) / elem;
  std::size_t count = 1;
  for (std::size_t d : dims) {
    if (d != 0 && count > available / d) throw Error(Errc::TruncatedPayload, "PACT payload shorter than dims " + shape_str(dims));
    count *= d;
  }
  if (bytes.size() - offset < count * elem)
    throw Error(Errc::TruncatedPayload, "PACT payload has " + std::to_string(bytes.size() - offset) + " bytes, dims " +
                                            shape_str(dims) + " need " + std::to_string(count * elem));
  if (elem == 4) return detail::decode_payload<float>(std::move(dims), bytes.data() + offset);
  return detail::decode_payload<double>(std::move(dims), bytes.data() + offset);
}

template <typename T>
void write_pact(const Tensor<T>& t, std::ostream& sink) {
  const auto bytes = encode_pact(t);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw Error(Errc::IoError, "failed to write PACT stream");
}

inline AnyTensor read_pact(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
  return decode_pact(bytes);
}

template <typename T>
void save_pact(const Tensor<T>& t, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  write_pact(t, f);
}

inline AnyTensor load_pact(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_pact(f);
}

template <typename T>
Tensor<T> load_pact_as(const std::filesystem::path& path) {
  auto any = load_pact(path);
  if (auto* t = std::get_if<Tensor<T>>(&any)) return std::move(*t);
  throw Error(Errc::ShapeMismatch, path.string() + " has dtype " + (std::holds_alternative<Tensor<float>>(any) ? "f32" : "f64") +
                                       ", expected " + (dtype_of<T>() == Dtype::F32 ? "f32" : "f64"));
}

// ---------------------------------------------------------------------------
// KITTI calibration text
// ---------------------------------------------------------------------------

// Reads fx, fy, cx, cy from the 3x4 "P2:" projection row-major matrix.
inline geometry::CameraIntrinsics parse_kitti_calib(std::string_view text) {
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream tokens(line);
    std::string key;
    if (!(tokens >> key) || key != "P2:") continue;
    std::vector<double> values;
    std::string tok;
    while (tokens >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw Error(Errc::MalformedNumber, "P2 entry '" + tok + "' is not a number");
      values.push_back(v);
    }
    if (values.size() != 12)
      throw Error(Errc::MalformedNumber, "P2 needs 12 numbers, found " + std::to_string(values.size()));
    const geometry::CameraIntrinsics k{values[0], values[5], values[2], values[6]};
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw Error(Errc::NonPositiveFocal, "P2 focal lengths must be positive");
    return k;
  }
  throw Error(Errc::MissingP2, "no 'P2:' line in calibration text");
}

inline geometry::CameraIntrinsics load_kitti_calib(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::IoError, "cannot open calibration file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_kitti_calib(ss.str());
}

// ---------------------------------------------------------------------------
// Angle-field visualization (binary PPM)
// ---------------------------------------------------------------------------

// Fully saturated, full-value HSV color for a hue in degrees.
inline std::array<std::uint8_t, 3> hue_to_rgb(double hue_deg) {
  double hp = std::fmod(hue_deg, 360.0) / 60.0;
  if (hp < 0.0) hp += 6.0;
  const double x = 1.0 - std::abs(std::fmod(hp, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = 1; g = x; break;
    case 1: r = x; g = 1; break;
    case 2: g = 1; b = x; break;
    case 3: g = x; b = 1; break;
    case 4: r = x; b = 1; break;
    default: r = 1; b = x; break;
  }
  auto q = [](double c) { return static_cast<std::uint8_t>(std::lround(c * 255.0)); };
  return {q(r), q(g), q(b)};
}

inline void write_angle_ppm(const geometry::AngleField& angles, std::ostream& sink) {
  angles.validate();
  sink << "P6\n" << angles.width << ' ' << angles.height << "\n255\n";
  std::vector<char> pixels(angles.width * angles.height * 3, 0);
  for (std::size_t p = 0; p < angles.phi.size(); ++p) {
    if (!angles.valid[p]) continue;
    const auto rgb = hue_to_rgb((angles.phi[p] + std::numbers::pi) / (2.0 * std::numbers::pi) * 360.0);
    for (std::size_t c = 0; c < 3; ++c) pixels[p * 3 + c] = static_cast<char>(rgb[c]);
  }
  sink.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!sink) throw Error(Errc::IoError, "failed to write PPM");
}

// ---------------------------------------------------------------------------
// PAC module parameter directory: manifest.txt + one PACT file per tensor.
// ---------------------------------------------------------------------------

inline constexpr const char* kManifestName = "manifest.txt";

inline std::string branch_file(std::size_t i, const char* what) {
  return "branch" + std::to_string(i) + "_" + what + ".pact";
}

template <typename T>
void save_module_params(const std::filesystem::path& dir, const PacModuleConfig& config,
                        const PacModuleParams<T>& params) {
  params.validate(config);
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / kManifestName);
  if (!manifest) throw Error(Errc::IoError, "cannot write manifest in " + dir.string());
  for (const auto& b : config.branches)
    manifest << (b.kind == BranchKind::Standard ? "standard" : "perspective") << ' ' << b.dilation << '\n';
  for (std::size_t i = 0; i < params.branches.size(); ++i) {
    save_pact(params.branches[i].weights, dir / branch_file(i, "weights"));
    save_pact(params.branches[i].bias, dir / branch_file(i, "bias"));
  }
  save_pact(params.fusion.weights, dir / "fusion_weights.pact");
  save_pact(params.fusion.bias, dir / "fusion_bias.pact");
}

// Channel widths come from the stored tensors; activation and seed are
// left at their config defaults.
template <typename T>
std::pair<PacModuleConfig, PacModuleParams<T>> load_module_params(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / kManifestName);
  if (!manifest) throw Error(Errc::IoError, "cannot read " + (dir / kManifestName).string());
  PacModuleConfig config;
  config.branches.clear();
  std::string line;
  while (std::getline(manifest, line)) {
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    long long dilation = 0;
    if (!(ss >> dilation) || dilation < 1) throw Error(Errc::MalformedNumber, "bad manifest line '" + line + "'");
    if (kind == "standard")
      config.branches.push_back({BranchKind::Standard, static_cast<std::size_t>(dilation)});
    else if (kind == "perspective")
      config.branches.push_back({BranchKind::Perspective, static_cast<std::size_t>(dilation)});
    else
      throw Error(Errc::InvalidArgument, "unknown branch kind '" + kind + "'");
  }
  PacModuleParams<T> params;
  for (std::size_t i = 0; i < config.branches.size(); ++i)
    params.branches.push_back(
        {load_pact_as<T>(dir / branch_file(i, "weights")), load_pact_as<T>(dir / branch_file(i, "bias"))});
  params.fusion = {load_pact_as<T>(dir / "fusion_weights.pact"), load_pact_as<T>(dir / "fusion_bias.pact")};
  if (params.branches.empty()) throw Error(Errc::InvalidArgument, "manifest lists no branches");
  require_rank(params.branches[0].weights, 4, "branch weights");
  require_rank(params.fusion.weights, 4, "fusion weights");
  config.c_mid = params.branches[0].weights.dim(0);
  config.c_in = params.branches[0].weights.dim(1);
  config.c_out = params.fusion.weights.dim(0);
  params.validate(config);
  return {config, params};
}

}  // namespace pac::io

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

#include <stdexcept>
#include <string>
#include <string_view>

namespace pac {

enum class Errc {
  DepthNotPositive,
  HorizonSingularity,
  InvalidDimensions,
  InvalidArgument,
  ShapeMismatch,
  NonFiniteInput,
  MissingP2,
  MalformedNumber,
  NonPositiveFocal,
  BadMagic,
  UnsupportedVersion,
  UnknownDtype,
  TruncatedPayload,
  IoError,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::DepthNotPositive: return "DepthNotPositive";
    case Errc::HorizonSingularity: return "HorizonSingularity";
    case Errc::InvalidDimensions: return "InvalidDimensions";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::MissingP2: return "MissingP2";
    case Errc::MalformedNumber: return "MalformedNumber";
    case Errc::NonPositiveFocal: return "NonPositiveFocal";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::UnknownDtype: return "UnknownDtype";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

// All library failures are reported through this exception; code() tells
// callers (and the CLI exit-code mapping) which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pac

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

#include "pac/bench.hpp"
#include "pac/camera_geometry.hpp"
#include "pac/error.hpp"
#include "pac/gradcheck.hpp"
#include "pac/io_formats.hpp"
#include "pac/offset_field.hpp"
#include "pac/pac_module.hpp"
#include "pac/parallel.hpp"
#include "pac/perspective_conv.hpp"
#include "pac/random.hpp"
#include "pac/tensor.hpp"

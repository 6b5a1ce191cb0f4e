// Copyright 2026 The maskbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Umbrella header for the maskbench library (excluding the HTTP service,
/// which pulls in cpp-httplib: include "maskbench/service.hpp" for that).

#include "maskbench/annotation_store.hpp"
#include "maskbench/codec.hpp"
#include "maskbench/error.hpp"
#include "maskbench/evaluation.hpp"
#include "maskbench/mask_ops.hpp"
#include "maskbench/pipeline.hpp"
#include "maskbench/preprocess.hpp"
#include "maskbench/raster.hpp"
#include "maskbench/segmentation.hpp"

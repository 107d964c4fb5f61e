// Copyright 2026 The uvtex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.
#pragma once

#include "uvtex/attack.hpp"
#include "uvtex/common.hpp"
#include "uvtex/detection.hpp"
#include "uvtex/envfusion.hpp"
#include "uvtex/geometry.hpp"
#include "uvtex/hash.hpp"
#include "uvtex/image.hpp"
#include "uvtex/optimizer.hpp"
#include "uvtex/renderer.hpp"
#include "uvtex/sampler.hpp"
#include "uvtex/scenegen.hpp"

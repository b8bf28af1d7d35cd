// Copyright 2026 The UR2M Authors. All Rights Reserved.
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

// Umbrella header.

#pragma once

#include "ur2m/baselines.hpp"
#include "ur2m/cascade_model.hpp"
#include "ur2m/dataset.hpp"
#include "ur2m/errors.hpp"
#include "ur2m/evaluate.hpp"
#include "ur2m/evidence.hpp"
#include "ur2m/exits.hpp"
#include "ur2m/format.hpp"
#include "ur2m/layers.hpp"
#include "ur2m/memory.hpp"
#include "ur2m/metrics.hpp"
#include "ur2m/mfcc.hpp"
#include "ur2m/opgraph.hpp"
#include "ur2m/optimizer.hpp"
#include "ur2m/pipeline.hpp"
#include "ur2m/quantize.hpp"
#include "ur2m/search.hpp"
#include "ur2m/serialize.hpp"
#include "ur2m/synthetic.hpp"
#include "ur2m/tensor.hpp"
#include "ur2m/train.hpp"

// Copyright 2026 The ttfuse Authors. All Rights Reserved.
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

#include "ttfuse/error.hpp"
#include "ttfuse/tensor.hpp"
#include "ttfuse/autograd.hpp"
#include "ttfuse/ops.hpp"
#include "ttfuse/optim.hpp"
#include "ttfuse/grad_check.hpp"
#include "ttfuse/rng.hpp"
#include "ttfuse/network.hpp"
#include "ttfuse/fusion.hpp"
#include "ttfuse/image.hpp"
#include "ttfuse/metrics.hpp"
#include "ttfuse/phantom.hpp"
#include "ttfuse/dataset.hpp"
#include "ttfuse/checkpoint.hpp"
#include "ttfuse/training.hpp"
#include "ttfuse/config.hpp"
#include "ttfuse/evaluation.hpp"

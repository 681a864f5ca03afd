/*
 * Copyright (C) 2026 The bnnpim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "common.hpp"
#include "cost_model.hpp"
#include "dataset.hpp"
#include "engine.hpp"
#include "hw_config.hpp"
#include "model_io.hpp"
#include "model_ir.hpp"
#include "packed_tensor.hpp"
#include "quantizer.hpp"
#include "reference.hpp"
#include "sweep.hpp"
#include "xbar.hpp"

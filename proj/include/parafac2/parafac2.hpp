/*
 *   Copyright 2026 The parafac2 Authors
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

#include "parafac2/bench.hpp"
#include "parafac2/common.hpp"
#include "parafac2/cp.hpp"
#include "parafac2/generator.hpp"
#include "parafac2/io.hpp"
#include "parafac2/kernels.hpp"
#include "parafac2/mttkrp.hpp"
#include "parafac2/parallel.hpp"
#include "parafac2/slices.hpp"
#include "parafac2/solver.hpp"
#include "parafac2/sparse.hpp"

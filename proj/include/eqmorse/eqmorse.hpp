/*
   Copyright 2026 The eqmorse Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

/// @file eqmorse.hpp
/// Umbrella header for the whole library.

#include "eqmorse/common.hpp"
#include "eqmorse/polynomial.hpp"
#include "eqmorse/z2t.hpp"
#include "eqmorse/geometry.hpp"
#include "eqmorse/flow.hpp"
#include "eqmorse/morse.hpp"
#include "eqmorse/jumps.hpp"
#include "eqmorse/equivariant.hpp"
#include "eqmorse/builtins.hpp"
#include "eqmorse/scenario.hpp"

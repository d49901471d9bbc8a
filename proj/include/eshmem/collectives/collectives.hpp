/*
 * Copyright 2026 The eshmem Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "eshmem/collectives/active_set.hpp"
#include "eshmem/collectives/alltoall.hpp"
#include "eshmem/collectives/barrier.hpp"
#include "eshmem/collectives/broadcast.hpp"
#include "eshmem/collectives/collect.hpp"
#include "eshmem/collectives/lock.hpp"
#include "eshmem/collectives/reduce.hpp"

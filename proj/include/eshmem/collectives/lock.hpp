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

#include <algorithm>

#include "eshmem/collectives/barrier.hpp"

namespace eshmem::coll {

// A lock is a symmetric 32-bit word; the copy on PE 0 is the one that
// matters. A held lock contains holder + 1.

inline void set_lock(Context& ctx, Offset lock) {
  ctx.call_overhead();
  auto& core = ctx.core();
  const mesh::GlobalAddr word = ctx.ptr(lock, 0);
  const auto tag = static_cast<std::uint32_t>(ctx.my_pe() + 1);
  core.spin_on(0, [&] { return core.testset(word, tag) == 0; });
  ctx.mutable_state().held_locks.push_back(lock);
}

/// Single attempt; true when the lock was acquired.
inline bool test_lock(Context& ctx, Offset lock) {
  ctx.call_overhead();
  const auto tag = static_cast<std::uint32_t>(ctx.my_pe() + 1);
  if (ctx.core().testset(ctx.ptr(lock, 0), tag) != 0) return false;
  ctx.mutable_state().held_locks.push_back(lock);
  return true;
}

/// Completes outstanding writes, then releases.
inline void clear_lock(Context& ctx, Offset lock) {
  auto& held = ctx.mutable_state().held_locks;
  const auto it = std::find(held.begin(), held.end(), lock);
  if (it == held.end() && ctx.core().mesh().options().strict) {
    throw mesh::Fault(mesh::FaultKind::usage, "clear_lock by a PE that does not hold the lock");
  }
  ctx.call_overhead();
  ctx.quiet();
  ctx.core().store_value<std::uint32_t>(ctx.ptr(lock, 0), 0);
  if (it != held.end()) held.erase(it);
}

}  // namespace eshmem::coll

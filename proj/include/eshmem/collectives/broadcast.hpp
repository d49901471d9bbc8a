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

#include "eshmem/collectives/barrier.hpp"

namespace eshmem::coll {

namespace detail {

inline void check_elem(std::uint32_t elem_size, std::initializer_list<std::uint32_t> allowed) {
  for (auto a : allowed) {
    if (a == elem_size) return;
  }
  throw mesh::Fault(mesh::FaultKind::usage, "unsupported element size " + std::to_string(elem_size));
}

inline void check_aligned(std::uint32_t align, std::initializer_list<Offset> offsets) {
  for (auto o : offsets) {
    if (o % align != 0) throw mesh::Fault(mesh::FaultKind::alignment, "collective buffer misaligned");
  }
}

// Fast-path copy from a local buffer into `dest` on `pe`.
inline void copy_to(Context& ctx, Offset src, Offset dest, std::uint64_t nbytes, PeId pe) {
  ctx.core().copy_out(src, ctx.ptr(dest, pe), static_cast<std::uint32_t>(nbytes));
}

}  // namespace detail

/// Tree broadcast from the member with rank `pe_root`. Data moves the
/// farthest distance first: the root sends to the member half the set away,
/// then both halves recurse. The root's own dest is left untouched.
inline void broadcast(Context& ctx, Offset dest, Offset src, std::size_t nelems,
                      std::uint32_t elem_size, std::uint32_t pe_root, const ActiveSet& set,
                      Offset psync) {
  detail::check_member(ctx, set);
  detail::check_elem(elem_size, {4, 8});
  detail::check_aligned(elem_size, {dest, src});
  if (pe_root >= set.pe_size) {
    throw mesh::Fault(mesh::FaultKind::usage, "broadcast root is not in the active set");
  }
  ctx.call_overhead();
  const std::uint32_t n = set.pe_size;
  if (n == 1) return;
  const std::uint64_t nbytes = std::uint64_t{nelems} * elem_size;
  const std::uint64_t seq = ctx.next_epoch(psync);
  const std::uint32_t rank = set.rank_of(ctx.my_pe());
  const std::uint32_t rel = (rank + n - pe_root) % n;
  const std::uint32_t span = std::bit_ceil(n);

  if (rel != 0) detail::wait_stamp(ctx, psync, seq);
  const Offset from = rel == 0 ? src : dest;
  // A member at relative rank rel received at distance lowbit(rel); it
  // forwards at every smaller power of two.
  for (std::uint32_t d = rel == 0 ? span / 2 : (rel & (~rel + 1)) / 2; d >= 1; d /= 2) {
    if (rel + d >= n) continue;
    detail::round_overhead(ctx);
    const PeId child = set.member((rel + d + pe_root) % n);
    detail::copy_to(ctx, from, dest, nbytes, child);
    detail::signal(ctx, psync, child, seq);
  }
  detail::dissemination(ctx, set, psync + 8, seq);
}

}  // namespace eshmem::coll

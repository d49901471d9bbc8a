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

#include "eshmem/collectives/broadcast.hpp"

namespace eshmem::coll {

/// Block j of every member's `src` lands in block rank(sender) of member j's
/// `dest`. Each member starts at its own rank so the targets are staggered.
inline void alltoall(Context& ctx, Offset dest, Offset src, std::size_t nelems,
                     std::uint32_t elem_size, const ActiveSet& set, Offset psync) {
  detail::check_member(ctx, set);
  detail::check_elem(elem_size, {4, 8});
  detail::check_aligned(elem_size, {dest, src});
  ctx.call_overhead();
  const std::uint32_t n = set.pe_size;
  const std::uint32_t rank = set.rank_of(ctx.my_pe());
  const std::uint64_t block = std::uint64_t{nelems} * elem_size;
  if (n == 1) {
    ctx.core().copy_out(src, ctx.core().local_addr(dest), static_cast<std::uint32_t>(block));
    return;
  }
  const std::uint64_t seq = ctx.next_epoch(psync);
  for (std::uint32_t r = 0; r < n; ++r) {
    const std::uint32_t j = (rank + r) % n;
    detail::round_overhead(ctx);
    detail::copy_to(ctx, static_cast<Offset>(src + j * block),
                    static_cast<Offset>(dest + rank * block), block, set.member(j));
  }
  ctx.quiet();
  detail::dissemination(ctx, set, psync, seq);
}

}  // namespace eshmem::coll

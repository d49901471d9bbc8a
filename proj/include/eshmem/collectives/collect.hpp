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

namespace detail {

// pSync words used by collect/fcollect.
inline constexpr Offset kPrefixValue = 0;
inline constexpr Offset kPrefixFlag = 8;
inline constexpr Offset kHeaderOffset = 16;
inline constexpr Offset kHeaderCount = 24;
inline constexpr Offset kDataFlag = 32;
inline constexpr Offset kAckFlag = 40;
inline constexpr Offset kCollectBarrier = 48;
inline constexpr Offset kDoublingFlags = 48 + 8 * BARRIER_SYNC_SIZE;

// Ring concatenation. Each member first learns its byte offset from a
// prefix sum passed down the ring, then blocks circulate with their
// (offset, length) header one hop per step; the receiver acknowledges each
// header before the sender may overwrite it.
inline void ring_collect(Context& ctx, Offset dest, Offset src, std::uint64_t my_bytes,
                         const ActiveSet& set, Offset psync) {
  const std::uint32_t n = set.pe_size;
  const std::uint32_t rank = set.rank_of(ctx.my_pe());
  const std::uint64_t base = ctx.next_epoch(psync, n + 1);
  const std::uint64_t barrier_seq = base + n;
  auto step_seq = [base](std::uint32_t s) { return base + 1 + s; };
  const PeId next = set.member((rank + 1) % n);
  const PeId prev = set.member((rank + n - 1) % n);
  auto& core = ctx.core();

  std::uint64_t my_off = 0;
  if (rank > 0) {
    wait_stamp(ctx, psync + kPrefixFlag, base);
    my_off = read_word(ctx, psync + kPrefixValue);
  }
  if (rank + 1 < n) {
    core.store_value<std::uint64_t>(ctx.ptr(psync + kPrefixValue, next), my_off + my_bytes);
    signal(ctx, psync + kPrefixFlag, next, base);
  }
  core.copy_out(src, core.local_addr(static_cast<Offset>(dest + my_off)),
                static_cast<std::uint32_t>(my_bytes));

  std::uint64_t cur_off = my_off;
  std::uint64_t cur_len = my_bytes;
  for (std::uint32_t s = 0; s + 1 < n; ++s) {
    round_overhead(ctx);
    if (s > 0) wait_stamp(ctx, psync + kAckFlag, step_seq(s - 1));
    const auto at = static_cast<Offset>(dest + cur_off);
    copy_to(ctx, at, at, cur_len, next);
    core.store_value<std::uint64_t>(ctx.ptr(psync + kHeaderOffset, next), cur_off);
    core.store_value<std::uint64_t>(ctx.ptr(psync + kHeaderCount, next), cur_len);
    signal(ctx, psync + kDataFlag, next, step_seq(s));

    wait_stamp(ctx, psync + kDataFlag, step_seq(s));
    cur_off = read_word(ctx, psync + kHeaderOffset);
    cur_len = read_word(ctx, psync + kHeaderCount);
    // Every flag sent must also be awaited, or a late arrival could clobber
    // a newer stamp after the pSync is reused; the last step has no waiter.
    if (s + 2 < n) signal(ctx, psync + kAckFlag, prev, step_seq(s));
  }
  dissemination(ctx, set, psync + kCollectBarrier, barrier_seq);
}

}  // namespace detail

/// Concatenate blocks of possibly different lengths in rank order.
inline void collect(Context& ctx, Offset dest, Offset src, std::size_t nelems,
                    std::uint32_t elem_size, const ActiveSet& set, Offset psync) {
  detail::check_member(ctx, set);
  detail::check_elem(elem_size, {4, 8});
  detail::check_aligned(elem_size, {dest, src});
  ctx.call_overhead();
  const std::uint64_t my_bytes = std::uint64_t{nelems} * elem_size;
  if (set.pe_size == 1) {
    ctx.core().copy_out(src, ctx.core().local_addr(dest), static_cast<std::uint32_t>(my_bytes));
    return;
  }
  detail::ring_collect(ctx, dest, src, my_bytes, set, psync);
}

/// Concatenate equal-length blocks. Power-of-two sets use recursive
/// doubling (the exchanged run of blocks doubles every round); other sizes
/// fall back to the ring.
inline void fcollect(Context& ctx, Offset dest, Offset src, std::size_t nelems,
                     std::uint32_t elem_size, const ActiveSet& set, Offset psync) {
  detail::check_member(ctx, set);
  detail::check_elem(elem_size, {4, 8});
  detail::check_aligned(elem_size, {dest, src});
  ctx.call_overhead();
  const std::uint32_t n = set.pe_size;
  const std::uint64_t block = std::uint64_t{nelems} * elem_size;
  auto& core = ctx.core();
  if (n == 1) {
    core.copy_out(src, core.local_addr(dest), static_cast<std::uint32_t>(block));
    return;
  }
  if (!is_pow2(n)) {
    detail::ring_collect(ctx, dest, src, block, set, psync);
    return;
  }
  const std::uint32_t rank = set.rank_of(ctx.my_pe());
  const std::uint64_t seq = ctx.next_epoch(psync, 2);
  core.copy_out(src, core.local_addr(static_cast<Offset>(dest + rank * block)),
                static_cast<std::uint32_t>(block));
  for (std::uint32_t r = 0; (1u << r) < n; ++r) {
    detail::round_overhead(ctx);
    const PeId partner = set.member(rank ^ (1u << r));
    const std::uint64_t first = (rank >> r) << r;
    const auto at = static_cast<Offset>(dest + first * block);
    detail::copy_to(ctx, at, at, block << r, partner);
    detail::signal(ctx, psync + detail::kDoublingFlags + 8 * r, partner, seq);
    detail::wait_stamp(ctx, psync + detail::kDoublingFlags + 8 * r, seq);
  }
  detail::dissemination(ctx, set, psync + detail::kCollectBarrier, seq + 1);
}

}  // namespace eshmem::coll

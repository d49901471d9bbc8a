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
#include <type_traits>

#include "eshmem/collectives/broadcast.hpp"

namespace eshmem::coll {

enum class ReduceOp { sum, prod, min, max, and_, or_, xor_ };

template <class T>
concept ReduceElement = std::is_same_v<T, std::int16_t> || std::is_same_v<T, std::int32_t> ||
                        std::is_same_v<T, std::int64_t> || std::is_same_v<T, float> ||
                        std::is_same_v<T, double>;

inline bool is_bitwise(ReduceOp op) {
  return op == ReduceOp::and_ || op == ReduceOp::or_ || op == ReduceOp::xor_;
}

template <ReduceElement T>
T combine(ReduceOp op, T a, T b) {
  using U = std::make_unsigned_t<std::conditional_t<std::is_integral_v<T>, T, int>>;
  switch (op) {
    case ReduceOp::sum:
      if constexpr (std::is_integral_v<T>) {
        return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
      } else {
        return a + b;
      }
    case ReduceOp::prod:
      if constexpr (std::is_integral_v<T>) {
        return static_cast<T>(static_cast<U>(a) * static_cast<U>(b));
      } else {
        return a * b;
      }
    case ReduceOp::min:
      return std::min(a, b);
    case ReduceOp::max:
      return std::max(a, b);
    default:
      break;
  }
  if constexpr (std::is_integral_v<T>) {
    switch (op) {
      case ReduceOp::and_: return static_cast<T>(a & b);
      case ReduceOp::or_: return static_cast<T>(a | b);
      case ReduceOp::xor_: return static_cast<T>(a ^ b);
      default: break;
    }
  }
  throw mesh::Fault(mesh::FaultKind::usage, "bitwise reduction on a floating type");
}

/// pWrk capacity, in elements, needed for a reduction of `nreduce` elements.
inline std::size_t reduce_work_elems(std::size_t nreduce) {
  return std::max<std::size_t>(nreduce / 2 + 1, REDUCE_MIN_WRKDATA_SIZE);
}

namespace detail {

inline constexpr Offset kRingReady = 0;
inline constexpr Offset kRingData = 8;
inline constexpr Offset kRingFinal = 16;
inline constexpr Offset kDoublingReady = 24;
inline constexpr Offset kDoublingData = 24 + 8 * BARRIER_SYNC_SIZE;

template <class T>
void combine_into(Context& ctx, ReduceOp op, Offset acc, Offset other, Offset out, std::size_t m) {
  auto a = ctx.view<T>(acc, m);
  auto b = ctx.view<T>(other, m);
  auto o = ctx.view<T>(out, m);
  for (std::size_t i = 0; i < m; ++i) o[i] = combine<T>(op, a[i], b[i]);
  const auto& c = ctx.core().cost();
  ctx.core().advance(mesh::to_cycles(static_cast<double>(m) * c.fast_path_cycles_per_dword()));
}

}  // namespace detail

/// All-reduce: every member of `set` ends with op applied over all members'
/// `src` arrays. Long arrays are processed in pieces that fit pWrk.
template <ReduceElement T>
void reduce(Context& ctx, ReduceOp op, Offset dest, Offset src, std::size_t nreduce,
            const ActiveSet& set, Offset pwrk, Offset psync) {
  if constexpr (std::is_floating_point_v<T>) {
    if (is_bitwise(op)) throw mesh::Fault(mesh::FaultKind::usage, "bitwise reduction on a floating type");
  }
  detail::check_member(ctx, set);
  detail::check_aligned(sizeof(T), {dest, src, pwrk});
  ctx.call_overhead();
  auto& core = ctx.core();
  const std::uint32_t n = set.pe_size;
  const std::uint32_t rank = set.rank_of(ctx.my_pe());
  const std::size_t chunk = reduce_work_elems(nreduce);

  auto local_copy = [&](Offset from, Offset to, std::size_t m) {
    core.copy_out(from, core.local_addr(to), static_cast<std::uint32_t>(m * sizeof(T)));
  };

  if (n == 1) {
    local_copy(src, dest, nreduce);
    return;
  }

  for (std::size_t c = 0; c < nreduce; c += chunk) {
    const std::size_t m = std::min(chunk, nreduce - c);
    const std::uint64_t bytes = m * sizeof(T);
    const auto s = static_cast<Offset>(src + c * sizeof(T));
    const auto d = static_cast<Offset>(dest + c * sizeof(T));
    const std::uint64_t seq = ctx.next_epoch(psync);

    if (is_pow2(n)) {
      // Recursive doubling: partners swap partial results each round after
      // the receiver says its pWrk is free.
      local_copy(s, d, m);
      for (std::uint32_t r = 0; (1u << r) < n; ++r) {
        detail::round_overhead(ctx);
        const PeId partner = set.member(rank ^ (1u << r));
        detail::signal(ctx, psync + detail::kDoublingReady + 8 * r, partner, seq);
        detail::wait_stamp(ctx, psync + detail::kDoublingReady + 8 * r, seq);
        detail::copy_to(ctx, d, pwrk, bytes, partner);
        detail::signal(ctx, psync + detail::kDoublingData + 8 * r, partner, seq);
        detail::wait_stamp(ctx, psync + detail::kDoublingData + 8 * r, seq);
        detail::combine_into<T>(ctx, op, d, pwrk, d, m);
      }
      continue;
    }

    // Ring: partial results flow from rank 0 to rank n-1 in order, then the
    // total flows back around from rank n-1 through rank n-2.
    const PeId next = set.member((rank + 1) % n);
    const PeId prev = set.member((rank + n - 1) % n);
    Offset partial = s;
    if (rank > 0) {
      detail::signal(ctx, psync + detail::kRingReady, prev, seq);
      detail::wait_stamp(ctx, psync + detail::kRingData, seq);
      detail::combine_into<T>(ctx, op, pwrk, s, d, m);
      partial = d;
    }
    if (rank + 1 < n) {
      detail::round_overhead(ctx);
      detail::wait_stamp(ctx, psync + detail::kRingReady, seq);
      detail::copy_to(ctx, partial, pwrk, bytes, next);
      detail::signal(ctx, psync + detail::kRingData, next, seq);
      detail::wait_stamp(ctx, psync + detail::kRingFinal, seq);
    }
    if (rank + 2 < n || rank + 1 == n) {
      detail::round_overhead(ctx);
      detail::copy_to(ctx, d, d, bytes, next);
      detail::signal(ctx, psync + detail::kRingFinal, next, seq);
    }
  }
}

}  // namespace eshmem::coll

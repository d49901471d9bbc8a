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
#include "eshmem/shmem/context.hpp"

namespace eshmem::coll {

using shmem::Context;

namespace detail {

inline std::uint64_t read_word(Context& ctx, Offset offset) {
  std::uint64_t v;
  std::memcpy(&v, ctx.local().data() + offset, 8);
  return v;
}

inline void wait_stamp(Context& ctx, Offset offset, std::uint64_t seq) {
  const std::byte* word = ctx.local().data() + offset;
  ctx.core().wait_local([word, seq] {
    std::uint64_t v;
    std::memcpy(&v, word, 8);
    return stamp_reached(v, seq);
  });
}

inline void signal(Context& ctx, Offset offset, PeId pe, std::uint64_t seq) {
  ctx.core().store_value<std::uint64_t>(ctx.ptr(offset, pe), make_stamp(seq));
}

inline void round_overhead(Context& ctx) {
  ctx.core().advance(mesh::to_cycles(ctx.core().cost().round_overhead_cycles));
}

// Round r: signal the member 2^r ranks ahead, then wait for the member 2^r
// ranks behind. Word r of `psync` is the only flag touched in round r.
inline void dissemination(Context& ctx, const ActiveSet& set, Offset psync, std::uint64_t seq) {
  const std::uint32_t rank = set.rank_of(ctx.my_pe());
  const std::uint32_t rounds = ceil_log2(set.pe_size);
  for (std::uint32_t r = 0; r < rounds; ++r) {
    round_overhead(ctx);
    signal(ctx, psync + 8 * r, set.member((rank + (1u << r)) % set.pe_size), seq);
    wait_stamp(ctx, psync + 8 * r, seq);
  }
}

inline void check_member(Context& ctx, const ActiveSet& set) {
  set.validate(ctx.n_pes());
  (void)set.rank_of(ctx.my_pe());
}

}  // namespace detail

/// Dissemination barrier over an active set; uses ceil(log2(pe_size)) words of psync.
inline void barrier(Context& ctx, const ActiveSet& set, Offset psync) {
  detail::check_member(ctx, set);
  ctx.call_overhead();
  ctx.quiet();
  if (set.pe_size == 1) return;
  detail::dissemination(ctx, set, psync, ctx.next_epoch(psync));
}

inline void barrier_all(Context& ctx) { ctx.barrier_all(); }

/// Counter barrier in the style of the vendor library, kept as a baseline:
/// every PE increments a counter on PE 0 under the atomic lock, PE 0 waits
/// for all arrivals and then releases each PE with a direct store.
inline void counter_barrier_all(Context& ctx) {
  const Offset counter = ctx.layout().counter_barrier;
  const Offset release = counter + 8;
  const std::uint64_t seq = ctx.next_epoch(counter);
  ctx.call_overhead();
  if (ctx.n_pes() == 1) return;
  ctx.atomic_add<std::int64_t>(counter, 1, 0);
  if (ctx.my_pe() == 0) {
    const auto target = static_cast<std::int64_t>(seq * ctx.n_pes());
    ctx.wait_until<std::int64_t>(counter, shmem::Cmp::ge, target);
    for (PeId pe = 1; pe < ctx.n_pes(); ++pe) {
      detail::round_overhead(ctx);
      detail::signal(ctx, release, pe, seq);
    }
  } else {
    detail::wait_stamp(ctx, release, seq);
  }
}

}  // namespace eshmem::coll

namespace eshmem::shmem {

inline void Context::barrier_all() {
  require_init();
  // The wired-AND path is a short inline sequence with no software prologue.
  if (state_.flags.use_wand_barrier) {
    quiet();
    core_.wand();
    return;
  }
  call_overhead();
  quiet();
  if (state_.n_pes == 1) return;
  const Offset psync = state_.layout.barrier_psync;
  const std::uint64_t seq = next_epoch(psync);
  for (std::uint32_t r = 0; r < state_.barrier_partners.size(); ++r) {
    coll::detail::round_overhead(*this);
    coll::detail::signal(*this, psync + 8 * r, state_.barrier_partners[r], seq);
    coll::detail::wait_stamp(*this, psync + 8 * r, seq);
  }
}

}  // namespace eshmem::shmem

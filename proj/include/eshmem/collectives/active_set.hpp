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

#include <bit>
#include <cstdint>

#include "eshmem/mesh/address.hpp"
#include "eshmem/mesh/errors.hpp"

namespace eshmem::coll {

using mesh::Offset;
using mesh::PeId;

// Symmetric array sizes, in 8-byte words. Barrier arrays are sized for the
// largest mesh (64 x 64 cores, 12 dissemination rounds).
inline constexpr std::uint32_t BARRIER_SYNC_SIZE = 12;
inline constexpr std::uint32_t BCAST_SYNC_SIZE = 1 + BARRIER_SYNC_SIZE;
inline constexpr std::uint32_t COLLECT_SYNC_SIZE = 6 + 2 * BARRIER_SYNC_SIZE;
inline constexpr std::uint32_t REDUCE_SYNC_SIZE = 3 + 2 * BARRIER_SYNC_SIZE;
inline constexpr std::uint32_t ALLTOALL_SYNC_SIZE = BARRIER_SYNC_SIZE;
inline constexpr std::uint32_t REDUCE_MIN_WRKDATA_SIZE = 16;
inline constexpr std::uint64_t SYNC_VALUE = 0;

/// ceil(log2(n)) for n >= 1.
constexpr std::uint32_t ceil_log2(std::uint32_t n) noexcept {
  return n <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(n - 1));
}

constexpr bool is_pow2(std::uint32_t n) noexcept { return std::has_single_bit(n); }

/// Members pe_start + k * 2^log_pe_stride for k in [0, pe_size).
struct ActiveSet {
  PeId pe_start = 0;
  std::uint32_t log_pe_stride = 0;
  std::uint32_t pe_size = 1;

  static ActiveSet all(std::uint32_t n_pes) { return {0, 0, n_pes}; }

  PeId member(std::uint32_t rank) const noexcept { return pe_start + (rank << log_pe_stride); }

  bool contains(PeId pe) const noexcept {
    if (pe < pe_start) return false;
    const std::uint32_t d = pe - pe_start;
    if (d & ((1u << log_pe_stride) - 1)) return false;
    return (d >> log_pe_stride) < pe_size;
  }

  std::uint32_t rank_of(PeId pe) const {
    if (!contains(pe)) {
      throw mesh::Fault(mesh::FaultKind::usage, "pe " + std::to_string(pe) + " is not in the active set");
    }
    return (pe - pe_start) >> log_pe_stride;
  }

  void validate(std::uint32_t n_pes) const {
    if (pe_size == 0 || log_pe_stride >= 31) {
      throw mesh::Fault(mesh::FaultKind::usage, "empty or malformed active set");
    }
    if (std::uint64_t{pe_start} + (std::uint64_t{pe_size - 1} << log_pe_stride) >= n_pes) {
      throw mesh::Fault(mesh::FaultKind::usage, "active set extends past the last pe");
    }
  }
};

// Flag words carry a tag in the top byte and a per-call sequence number
// below it, so a word is only ever overwritten with a larger stamp and a
// stale value from an earlier call never satisfies a wait.
inline constexpr std::uint64_t kStampTag = 0xE5ull << 56;
inline constexpr std::uint64_t kStampMask = (1ull << 56) - 1;

constexpr std::uint64_t make_stamp(std::uint64_t seq) noexcept { return kStampTag | (seq & kStampMask); }

constexpr bool stamp_reached(std::uint64_t word, std::uint64_t seq) noexcept {
  return (word & ~kStampMask) == kStampTag && (word & kStampMask) >= seq;
}

}  // namespace eshmem::coll

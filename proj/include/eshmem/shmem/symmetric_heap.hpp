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
#include <bit>
#include <iterator>
#include <cstdint>
#include <vector>

#include "eshmem/mesh/errors.hpp"
#include "eshmem/mesh/local_store.hpp"

namespace eshmem::shmem {

using mesh::Fault;
using mesh::FaultKind;
using mesh::Offset;

inline constexpr std::uint32_t kDefaultAlignment = 8;

struct SymAlloc {
  Offset offset = 0;
  std::uint32_t size = 0;
  std::uint32_t alignment = kDefaultAlignment;

  friend bool operator==(const SymAlloc&, const SymAlloc&) = default;
};

/// Bump allocator over a core's heap region. There is no free list:
///  - freeing an allocation releases it and everything allocated after it,
///  - only the most recent live allocation may be resized,
///  - alignments are powers of two no smaller than 8.
class SymmetricHeap {
 public:
  explicit SymmetricHeap(mesh::LocalStore& store) : store_(store) {}

  SymAlloc allocate(std::uint32_t size, std::uint32_t alignment = kDefaultAlignment) {
    if (alignment < kDefaultAlignment || !std::has_single_bit(alignment)) {
      throw Fault(FaultKind::usage, "alignment must be a power of two of at least 8");
    }
    const std::uint64_t offset = round_up(store_.heap_brk, alignment);
    const std::uint64_t end = offset + round_up(size, kDefaultAlignment);
    if (end > store_.stack_limit) {
      throw Fault(FaultKind::range, "symmetric heap exhausted (" + std::to_string(size) +
                                        " bytes requested)");
    }
    SymAlloc a{static_cast<Offset>(offset), size, alignment};
    store_.heap_brk = static_cast<Offset>(end);
    live_.push_back(a);
    return a;
  }

  void free(const SymAlloc& a) {
    // Release `a` and everything allocated after it. Matching by position
    // rather than by offset keeps an earlier zero-size block at the same
    // address alive.
    const auto it = std::find(live_.rbegin(), live_.rend(), a);
    if (a.offset > store_.heap_brk || it == live_.rend()) {
      throw Fault(FaultKind::usage, "free of an allocation that is not live");
    }
    live_.erase(std::prev(it.base()), live_.end());
    store_.heap_brk = a.offset;
  }

  SymAlloc reallocate(const SymAlloc& a, std::uint32_t new_size) {
    if (live_.empty() || !(live_.back() == a)) {
      throw Fault(FaultKind::usage, "realloc is only allowed on the last allocation");
    }
    const std::uint64_t end = std::uint64_t{a.offset} + round_up(new_size, kDefaultAlignment);
    if (end > store_.stack_limit) {
      throw Fault(FaultKind::range, "symmetric heap exhausted on realloc");
    }
    live_.back().size = new_size;
    store_.heap_brk = static_cast<Offset>(end);
    return live_.back();
  }

  Offset brk() const noexcept { return store_.heap_brk; }
  Offset base() const noexcept { return store_.heap_base; }
  const std::vector<SymAlloc>& live() const noexcept { return live_; }

 private:
  static std::uint64_t round_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

  mesh::LocalStore& store_;
  std::vector<SymAlloc> live_;
};

}  // namespace eshmem::shmem

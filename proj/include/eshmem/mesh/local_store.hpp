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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "eshmem/mesh/address.hpp"

namespace eshmem::mesh {

inline constexpr std::uint32_t kLocalMemSize = 32 * 1024;

struct MemoryLayout {
  std::uint32_t local_mem_size = kLocalMemSize;
  // End of the loaded program image; identical on every core.
  Offset program_end = 0x1000;
  std::uint32_t stack_bytes = 0x800;

  Offset stack_limit() const noexcept { return local_mem_size - stack_bytes; }
};

// Flat per-core SRAM with the region markers of a typical SPMD image:
//   [0, program_end) program | [heap_base, heap_brk) heap | ... | [stack_limit, size) stack
struct LocalStore {
  std::vector<std::byte> bytes;
  Offset program_end = 0;
  Offset heap_base = 0;
  Offset heap_brk = 0;
  Offset stack_limit = 0;

  explicit LocalStore(const MemoryLayout& layout)
      : bytes(layout.local_mem_size),
        program_end(layout.program_end),
        heap_base(layout.program_end),
        heap_brk(layout.program_end),
        stack_limit(layout.stack_limit()) {}

  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(bytes.size()); }

  bool regions_valid() const noexcept {
    return program_end <= heap_base && heap_base <= heap_brk && heap_brk <= stack_limit &&
           stack_limit <= size();
  }
};

}  // namespace eshmem::mesh

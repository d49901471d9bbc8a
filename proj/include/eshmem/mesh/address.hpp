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

#include <compare>
#include <cstdint>

namespace eshmem::mesh {

using Cycle = std::uint64_t;
using PeId = std::uint32_t;
using Offset = std::uint32_t;

inline constexpr std::uint32_t kCoordBits = 6;
inline constexpr std::uint32_t kMaxMeshDim = 1u << kCoordBits;
inline constexpr std::uint32_t kOffsetBits = 20;
inline constexpr std::uint32_t kOffsetMask = (1u << kOffsetBits) - 1;
inline constexpr std::uint32_t kCoreIdMask = (1u << 12) - 1;

struct CoreCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  constexpr std::uint32_t core_id() const noexcept { return (row << kCoordBits) | col; }

  static constexpr CoreCoord from_core_id(std::uint32_t id) noexcept {
    return {(id >> kCoordBits) & (kMaxMeshDim - 1), id & (kMaxMeshDim - 1)};
  }

  friend constexpr auto operator<=>(const CoreCoord&, const CoreCoord&) = default;
};

constexpr std::uint32_t manhattan(CoreCoord a, CoreCoord b) noexcept {
  auto d = [](std::uint32_t x, std::uint32_t y) { return x > y ? x - y : y - x; };
  return d(a.row, b.row) + d(a.col, b.col);
}

/// Packed 32-bit address: 12-bit core id in the high bits, 20-bit byte offset below.
struct GlobalAddr {
  std::uint32_t core_id = 0;
  Offset offset = 0;

  constexpr std::uint32_t packed() const noexcept {
    return ((core_id & kCoreIdMask) << kOffsetBits) | (offset & kOffsetMask);
  }

  static constexpr GlobalAddr unpack(std::uint32_t packed) noexcept {
    return {packed >> kOffsetBits, packed & kOffsetMask};
  }

  constexpr CoreCoord coord() const noexcept { return CoreCoord::from_core_id(core_id); }

  constexpr GlobalAddr operator+(std::uint32_t bytes) const noexcept {
    return {core_id, offset + bytes};
  }

  friend constexpr auto operator<=>(const GlobalAddr&, const GlobalAddr&) = default;
};

}  // namespace eshmem::mesh

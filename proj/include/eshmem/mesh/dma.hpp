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

#include <cstdint>
#include <optional>

#include "eshmem/mesh/address.hpp"

namespace eshmem::mesh {

/// 2D strided transfer. Element (o, i) moves from
/// src + o*src_outer_stride + i*src_inner_stride to the matching dst position.
struct DmaDescriptor {
  std::uint32_t channel = 0;
  GlobalAddr src;
  GlobalAddr dst;
  std::uint32_t inner_count = 1;
  std::uint32_t outer_count = 1;
  std::uint32_t elem_size = 8;
  std::int64_t src_inner_stride = 8;
  std::int64_t src_outer_stride = 0;
  std::int64_t dst_inner_stride = 8;
  std::int64_t dst_outer_stride = 0;

  std::uint64_t element_count() const noexcept {
    return std::uint64_t{inner_count} * outer_count;
  }
  std::uint64_t total_bytes() const noexcept { return element_count() * elem_size; }

  static DmaDescriptor contiguous(std::uint32_t channel, GlobalAddr src, GlobalAddr dst,
                                  std::uint32_t count, std::uint32_t elem_size) {
    DmaDescriptor d;
    d.channel = channel;
    d.src = src;
    d.dst = dst;
    d.inner_count = count;
    d.outer_count = 1;
    d.elem_size = elem_size;
    d.src_inner_stride = elem_size;
    d.dst_inner_stride = elem_size;
    d.src_outer_stride = std::int64_t{count} * elem_size;
    d.dst_outer_stride = std::int64_t{count} * elem_size;
    return d;
  }
};

enum class ChannelState { idle, busy };
enum class DmaStart { accepted, channel_busy };

inline constexpr std::uint32_t kDmaChannels = 2;

struct DmaChannel {
  ChannelState state = ChannelState::idle;
  Cycle completion_time = 0;
  std::optional<DmaDescriptor> active;
};

}  // namespace eshmem::mesh

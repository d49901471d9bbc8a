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

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "eshmem/mesh/address.hpp"
#include "eshmem/mesh/errors.hpp"

namespace eshmem::mesh {

/// Calibration constants that turn simulated events into cycles.
///
/// Defaults model a 16-core Epiphany-III at 600 MHz. The fast-path copy moves
/// one double-word per (store_cycles_per_dword + load_extra_cycles) clocks.
/// Hop costs are not published for the chip; hop_cycles and the latency
/// fields below it are calibration parameters, not measured facts.
struct CostModel {
  double clock_hz = 600e6;
  double store_cycles_per_dword = 1.0;
  double load_extra_cycles = 1.0;
  double hop_cycles = 1.5;
  double read_roundtrip_base = 16.0;
  double dma_setup_cycles = 64.0;
  // Errata throttle: stays below half of 8 bytes/clock.
  double dma_cycles_per_dword = 2.5;
  double interrupt_latency_cycles = 32.0;
  double testset_roundtrip_cycles = 18.0;
  double wand_barrier_cycles = 52.0;
  double alignment_penalty_factor = 4.0;

  // Network injection plus ejection for a posted remote store.
  double write_latency_cycles = 8.0;
  // One spin iteration on a local word or a DMA status register.
  double poll_cycles = 4.0;
  // Software prologue of a runtime call.
  double call_overhead_cycles = 20.0;
  // Loop bookkeeping per round of a collective algorithm.
  double round_overhead_cycles = 9.0;

  double fast_path_cycles_per_dword() const noexcept {
    return store_cycles_per_dword + load_extra_cycles;
  }

  double peak_bytes_per_second() const noexcept {
    return 8.0 / fast_path_cycles_per_dword() * clock_hz;
  }

  double cycles_to_seconds(double c) const noexcept { return c / clock_hz; }

  /// One-way hop latency over `hops` mesh links, rounded up to whole cycles.
  Cycle hop_latency(std::uint32_t hops) const noexcept {
    return static_cast<Cycle>(std::ceil(hop_cycles * hops - 1e-9));
  }

  Cycle round_trip_hops(std::uint32_t hops) const noexcept {
    return static_cast<Cycle>(std::ceil(2.0 * hop_cycles * hops - 1e-9));
  }

  void validate() const;
};

struct CostField {
  std::string_view name;
  double CostModel::*member;
};

inline constexpr std::array<CostField, 15> kCostFields{{
    {"clock_hz", &CostModel::clock_hz},
    {"store_cycles_per_dword", &CostModel::store_cycles_per_dword},
    {"load_extra_cycles", &CostModel::load_extra_cycles},
    {"hop_cycles", &CostModel::hop_cycles},
    {"read_roundtrip_base", &CostModel::read_roundtrip_base},
    {"dma_setup_cycles", &CostModel::dma_setup_cycles},
    {"dma_cycles_per_dword", &CostModel::dma_cycles_per_dword},
    {"interrupt_latency_cycles", &CostModel::interrupt_latency_cycles},
    {"testset_roundtrip_cycles", &CostModel::testset_roundtrip_cycles},
    {"wand_barrier_cycles", &CostModel::wand_barrier_cycles},
    {"alignment_penalty_factor", &CostModel::alignment_penalty_factor},
    {"write_latency_cycles", &CostModel::write_latency_cycles},
    {"poll_cycles", &CostModel::poll_cycles},
    {"call_overhead_cycles", &CostModel::call_overhead_cycles},
    {"round_overhead_cycles", &CostModel::round_overhead_cycles},
}};

inline void CostModel::validate() const {
  for (const auto& f : kCostFields) {
    const double v = this->*(f.member);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Fault(FaultKind::config, std::string(f.name) + " must be strictly positive");
    }
  }
  if (read_roundtrip_base < write_latency_cycles) {
    throw Fault(FaultKind::config, "read_roundtrip_base must cover write_latency_cycles");
  }
}

/// Whole cycles for a fractional charge.
inline Cycle to_cycles(double c) noexcept {
  return c <= 0.0 ? 0 : static_cast<Cycle>(std::ceil(c - 1e-9));
}

}  // namespace eshmem::mesh

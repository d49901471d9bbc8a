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
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eshmem/collectives/collectives.hpp"
#include "eshmem/config.hpp"
#include "eshmem/mesh/mesh.hpp"
#include "eshmem/shmem/context.hpp"

namespace eshmem::bench {

/// Raised for unusable benchmark configurations (unknown routine, bad sweep).
class SuiteError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BenchConfig {
  std::vector<std::string> routines;
  std::uint32_t pes = 16;
  std::uint32_t rows = 4;
  std::uint32_t cols = 4;
  std::uint64_t min_bytes = 8;
  std::uint64_t max_bytes = 8192;
  std::uint32_t reps = 100;
  std::uint32_t warmup = 2;
  std::uint64_t seed = 1;
  RuntimeConfig runtime;
};

/// One timed point. `cycles` and `seconds` are per-iteration means on PE 0.
struct BenchSample {
  std::string routine;
  std::uint32_t pe_count = 0;
  std::uint64_t size_bytes = 0;
  std::uint32_t reps = 0;
  double cycles = 0;
  double seconds = 0;

  double bandwidth() const { return size_bytes == 0 ? 0.0 : static_cast<double>(size_bytes) / seconds; }
};

enum class Sweep { size, pes, none };

struct RoutineInfo {
  std::string_view name;
  Sweep sweep;
  // Fixed message size for routines that do not sweep L.
  std::uint64_t fixed_bytes;
};

inline constexpr std::array<RoutineInfo, 13> kRoutines{{
    {"put", Sweep::size, 0},
    {"get", Sweep::size, 0},
    {"put_nbi", Sweep::size, 0},
    {"get_nbi", Sweep::size, 0},
    {"atomics", Sweep::none, 8},
    {"barrier", Sweep::pes, 0},
    {"barrier_counter", Sweep::pes, 0},
    {"broadcast", Sweep::size, 0},
    {"collect", Sweep::size, 0},
    {"fcollect", Sweep::size, 0},
    {"reduce", Sweep::size, 0},
    {"alltoall", Sweep::size, 0},
    {"locks", Sweep::none, 0},
}};

inline std::vector<std::string> all_routines() {
  std::vector<std::string> out;
  for (const auto& r : kRoutines) out.emplace_back(r.name);
  return out;
}

inline const RoutineInfo& routine_info(std::string_view name) {
  for (const auto& r : kRoutines) {
    if (r.name == name) return r;
  }
  throw SuiteError("unknown benchmark routine '" + std::string(name) + "'");
}

/// L = 8 * 2^k inside [min_bytes, max_bytes].
inline std::vector<std::uint64_t> size_sweep(std::uint64_t min_bytes, std::uint64_t max_bytes) {
  if (min_bytes == 0 || min_bytes > max_bytes) throw SuiteError("invalid size range");
  std::vector<std::uint64_t> out;
  for (std::uint64_t l = 8; l <= max_bytes; l *= 2) {
    if (l >= min_bytes) out.push_back(l);
  }
  if (out.empty()) throw SuiteError("size range contains no 8*2^k size");
  return out;
}

/// Powers of two below `pes`, then `pes` itself.
inline std::vector<std::uint32_t> pe_sweep(std::uint32_t pes) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t p = 2; p < pes; p *= 2) out.push_back(p);
  out.push_back(pes);
  return out;
}

/// Most nearly square rows x cols grid with exactly `pes` cores that fits
/// inside max_rows x max_cols.
inline std::optional<std::pair<std::uint32_t, std::uint32_t>> mesh_shape(std::uint32_t pes,
                                                                         std::uint32_t max_rows,
                                                                         std::uint32_t max_cols) {
  if (pes == max_rows * max_cols) return std::pair{max_rows, max_cols};
  std::optional<std::pair<std::uint32_t, std::uint32_t>> best;
  for (std::uint32_t r = 1; r <= max_rows; ++r) {
    if (pes % r != 0 || pes / r > max_cols) continue;
    const std::uint32_t c = pes / r;
    const auto skew = [](auto s) { return s.first > s.second ? s.first - s.second : s.second - s.first; };
    if (!best || skew(std::pair{r, c}) < skew(*best)) best = std::pair{r, c};
  }
  return best;
}

inline void validate(const BenchConfig& cfg) {
  for (const auto& r : cfg.routines) (void)routine_info(r);
  if (cfg.rows == 0 || cfg.cols == 0 || cfg.rows > mesh::kMaxMeshDim || cfg.cols > mesh::kMaxMeshDim) {
    throw SuiteError("mesh dimensions must be in 1..64");
  }
  if (cfg.pes == 0 || cfg.pes > cfg.rows * cfg.cols) throw SuiteError("pe count does not fit the mesh");
  if (!mesh_shape(cfg.pes, cfg.rows, cfg.cols)) throw SuiteError("no mesh shape holds that pe count");
  if (cfg.reps == 0) throw SuiteError("reps must be at least 1");
  (void)size_sweep(cfg.min_bytes, cfg.max_bytes);
  cfg.runtime.cost.validate();
}

namespace detail {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Symmetric heap space available to a benchmark after the runtime area.
inline std::uint64_t heap_capacity(const mesh::MemoryLayout& layout) {
  return layout.stack_limit() - shmem::RuntimeLayout::at(layout.program_end).end;
}

// Heap bytes a routine needs at message size L on p PEs.
inline std::uint64_t heap_need(std::string_view r, std::uint64_t l, std::uint32_t p) {
  const std::uint64_t psync = 8 * coll::COLLECT_SYNC_SIZE;
  if (r == "collect" || r == "fcollect") return l + p * l + psync;
  if (r == "reduce") return 2 * l + 8 * coll::reduce_work_elems(l / 8) + 8 * coll::REDUCE_SYNC_SIZE;
  if (r == "alltoall") return 2 * p * l + psync;
  return 2 * l + psync;
}

}  // namespace detail

/// Time one routine at one (pe_count, size) point in a fresh mesh. Every PE
/// runs the same loop against PE (me + 1) mod N; PE 0's clock is reported.
/// Returns nothing if the buffers do not fit in local memory.
inline std::optional<BenchSample> run_point(const BenchConfig& cfg, std::string_view routine,
                                            std::uint32_t pes, std::uint64_t l) {
  const auto shape = mesh_shape(pes, cfg.rows, cfg.cols);
  if (!shape) return std::nullopt;
  mesh::MeshOptions opts;
  if (detail::heap_need(routine, l, pes) + 64 > detail::heap_capacity(opts.layout)) return std::nullopt;

  std::uint64_t key = cfg.seed;
  for (char ch : routine) key = detail::mix(key ^ static_cast<unsigned char>(ch));
  opts.scheduler.randomized = true;
  opts.scheduler.seed = detail::mix(detail::mix(key ^ pes) ^ l);

  mesh::Mesh m(shape->first, shape->second, cfg.runtime.cost, opts);
  mesh::Cycle elapsed = 0;
  const std::uint32_t n_bytes = static_cast<std::uint32_t>(l);
  const std::size_t n64 = l / 8;

  m.run([&](mesh::Core& core) {
    shmem::Context ctx(core, cfg.runtime.flags);
    ctx.init();
    const mesh::PeId me = ctx.my_pe();
    const mesh::PeId next = (me + 1) % pes;
    const auto set = coll::ActiveSet::all(pes);

    std::uint64_t src_bytes = l, dst_bytes = l;
    if (routine == "collect" || routine == "fcollect") dst_bytes = l * pes;
    if (routine == "alltoall") src_bytes = dst_bytes = l * pes;
    if (routine == "atomics" || routine == "locks") src_bytes = dst_bytes = 8;
    const auto src = ctx.malloc(static_cast<std::uint32_t>(src_bytes));
    const auto dst = ctx.malloc(static_cast<std::uint32_t>(dst_bytes));
    const auto psync = ctx.malloc(8 * std::max(coll::COLLECT_SYNC_SIZE, coll::REDUCE_SYNC_SIZE));
    const auto pwrk = ctx.malloc(static_cast<std::uint32_t>(8 * coll::reduce_work_elems(n64)));
    auto bytes = ctx.local();
    for (std::uint64_t i = 0; i < src_bytes; ++i) bytes[src.offset + i] = std::byte(i * 7 + me);
    std::fill_n(bytes.begin() + dst.offset, dst_bytes, std::byte{0});
    ctx.barrier_all();

    auto body = [&] {
      if (routine == "put") {
        ctx.putmem(dst.offset, src.offset, n_bytes, next);
      } else if (routine == "get") {
        ctx.getmem(dst.offset, src.offset, n_bytes, next);
      } else if (routine == "put_nbi") {
        ctx.put_nbi(dst.offset, src.offset, n64, 8, next);
        ctx.quiet();
      } else if (routine == "get_nbi") {
        ctx.get_nbi(dst.offset, src.offset, n64, 8, next);
        ctx.quiet();
      } else if (routine == "atomics") {
        (void)ctx.atomic_fetch_add<std::int64_t>(dst.offset, 1, next);
      } else if (routine == "barrier") {
        ctx.barrier_all();
      } else if (routine == "barrier_counter") {
        coll::counter_barrier_all(ctx);
      } else if (routine == "broadcast") {
        coll::broadcast(ctx, dst.offset, src.offset, n64, 8, 0, set, psync.offset);
      } else if (routine == "collect") {
        coll::collect(ctx, dst.offset, src.offset, n64, 8, set, psync.offset);
      } else if (routine == "fcollect") {
        coll::fcollect(ctx, dst.offset, src.offset, n64, 8, set, psync.offset);
      } else if (routine == "reduce") {
        coll::reduce<std::int64_t>(ctx, coll::ReduceOp::sum, dst.offset, src.offset, n64, set,
                                   pwrk.offset, psync.offset);
      } else if (routine == "alltoall") {
        coll::alltoall(ctx, dst.offset, src.offset, n64, 8, set, psync.offset);
      } else if (routine == "locks") {
        coll::set_lock(ctx, dst.offset);
        coll::clear_lock(ctx, dst.offset);
      }
    };

    for (std::uint32_t i = 0; i < cfg.warmup; ++i) body();
    ctx.quiet();
    ctx.barrier_all();
    const mesh::Cycle t0 = core.now();
    for (std::uint32_t i = 0; i < cfg.reps; ++i) body();
    ctx.quiet();
    if (me == 0) elapsed = core.now() - t0;
    ctx.barrier_all();
  });

  BenchSample s;
  s.routine = std::string(routine);
  s.pe_count = pes;
  s.size_bytes = l;
  s.reps = cfg.reps;
  s.cycles = static_cast<double>(elapsed) / cfg.reps;
  s.seconds = cfg.runtime.cost.cycles_to_seconds(s.cycles);
  return s;
}

/// Run every selected routine over its sweep, in the order given.
inline std::vector<BenchSample> run_suite(const BenchConfig& cfg) {
  validate(cfg);
  const auto sizes = size_sweep(cfg.min_bytes, cfg.max_bytes);
  std::vector<BenchSample> out;
  for (const auto& name : cfg.routines) {
    const auto& info = routine_info(name);
    std::vector<std::uint32_t> pes{cfg.pes};
    std::vector<std::uint64_t> ls = sizes;
    if (info.sweep != Sweep::size) ls = {info.fixed_bytes};
    if (info.sweep == Sweep::pes) pes = pe_sweep(cfg.pes);
    for (auto p : pes) {
      for (auto l : ls) {
        if (auto s = run_point(cfg, name, p, l)) out.push_back(std::move(*s));
      }
    }
  }
  return out;
}

}  // namespace eshmem::bench

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
#include <bit>
#include <boost/context/fiber.hpp>
#include <boost/context/fixedsize_stack.hpp>
#include <cstring>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eshmem/mesh/address.hpp"
#include "eshmem/mesh/cost_model.hpp"
#include "eshmem/mesh/dma.hpp"
#include "eshmem/mesh/errors.hpp"
#include "eshmem/mesh/local_store.hpp"

namespace eshmem::mesh {

struct SchedulerOptions {
  // Randomized mode breaks same-cycle ties with a seeded RNG and, when
  // jitter > 0, delays each operation by up to `jitter` cycles.
  bool randomized = false;
  std::uint64_t seed = 1;
  Cycle jitter = 0;
};

struct MeshOptions {
  MemoryLayout layout;
  SchedulerOptions scheduler;
  bool strict = false;
  bool trace = false;
  std::size_t fiber_stack_bytes = 256 * 1024;
  Cycle max_cycles = Cycle{1} << 40;
};

enum class TraceKind { write, read, copy_out, copy_in, testset, dma, interrupt, wand };

struct TraceRecord {
  Cycle time = 0;
  TraceKind kind = TraceKind::write;
  PeId issuer = 0;
  PeId target = 0;
  Offset offset = 0;
  std::uint64_t bytes = 0;
};

class Mesh;

using InterruptHandler = std::function<void(class Core&, std::uint32_t arg)>;

/// Per-PE handle. All methods must be called from the PE's own program
/// context (inside Mesh::run); each memory operation is a scheduling point.
class Core {
 public:
  Core(Mesh& mesh, PeId id, CoreCoord coord) : mesh_(mesh), id_(id), coord_(coord) {}
  Core(const Core&) = delete;
  Core& operator=(const Core&) = delete;

  PeId pe() const noexcept { return id_; }
  CoreCoord coord() const noexcept { return coord_; }
  Cycle now() const noexcept { return now_; }
  Mesh& mesh() noexcept { return mesh_; }
  const Mesh& mesh() const noexcept { return mesh_; }
  const CostModel& cost() const noexcept;
  LocalStore& store() noexcept;
  std::span<std::byte> memory() noexcept;
  GlobalAddr local_addr(Offset offset) const noexcept { return {coord_.core_id(), offset}; }

  /// Charge local computation time.
  void advance(Cycle cycles) noexcept { now_ += cycles; }

  /// Let every event that precedes this core's clock take effect, then run
  /// any pending interrupt handler.
  void sync();

  Cycle write(GlobalAddr dst, std::span<const std::byte> data);
  std::uint64_t read(GlobalAddr src, std::uint32_t width, Cycle* charged = nullptr);

  template <class T>
  void store_value(GlobalAddr dst, T value) {
    static_assert(sizeof(T) <= 8 && std::has_single_bit(sizeof(T)));
    write(dst, std::as_bytes(std::span<const T, 1>(&value, 1)));
  }

  template <class T>
  T load_value(GlobalAddr src) {
    static_assert(sizeof(T) <= 8 && std::has_single_bit(sizeof(T)));
    const std::uint64_t raw = read(src, sizeof(T));
    T out;
    std::memcpy(&out, &raw, sizeof(T));
    return out;
  }

  /// Fast-path copy loop: local load + remote store per double-word.
  Cycle copy_out(Offset src, GlobalAddr dst, std::uint32_t nbytes);
  /// Direct remote-read loop into the local store.
  Cycle copy_in(GlobalAddr src, Offset dst, std::uint32_t nbytes);

  std::uint32_t testset(GlobalAddr target, std::uint32_t value);

  DmaStart dma_start(const DmaDescriptor& desc);
  ChannelState dma_poll(std::uint32_t channel);
  void dma_wait_idle(std::uint32_t channel);
  const DmaChannel& dma_channel(std::uint32_t channel) const { return dma_.at(channel); }

  /// Spin until every store this core has issued has been delivered.
  void wait_stores_delivered();

  /// Spin on the local store until `pred()` holds. Each check costs one poll.
  template <class Pred>
  void wait_local(Pred&& pred);

  /// Retry `attempt()` every poll period; between attempts the core sleeps
  /// until the watched store changes. Returns once `attempt()` is true.
  template <class Attempt>
  void spin_on(PeId watched, Attempt&& attempt);

  void wand();

  void raise_interrupt(PeId target, std::uint32_t arg);
  void set_interrupt_handler(InterruptHandler handler) { handler_ = std::move(handler); }
  bool has_interrupt_handler() const noexcept { return static_cast<bool>(handler_); }
  bool in_interrupt() const noexcept { return in_isr_; }

  bool program_done() const noexcept { return program_done_; }

 private:
  friend class Mesh;

  void suspend();
  void yield_until(Cycle t);
  // Sleep until woken; a timeout schedules a self-wake.
  void block(const char* reason, std::optional<Cycle> timeout, std::optional<PeId> watch);
  void service_interrupts();
  void poll_until(Cycle ready);
  void check_local_write(Offset offset, std::uint64_t n) const;
  Cycle align_to_poll(Cycle t) const noexcept;

  Mesh& mesh_;
  PeId id_;
  CoreCoord coord_;
  Cycle now_ = 0;

  boost::context::fiber fiber_;
  boost::context::fiber driver_;
  bool started_ = false;
  bool program_done_ = false;
  std::exception_ptr error_;

  bool blocked_ = false;
  const char* wait_reason_ = "";
  std::optional<Cycle> wake_at_;
  std::uint64_t wake_token_ = 0;
  std::optional<Cycle> poll_anchor_;

  std::deque<std::uint32_t> pending_irqs_;
  InterruptHandler handler_;
  bool in_isr_ = false;

  std::array<DmaChannel, kDmaChannels> dma_{};
  struct SourceRange {
    Offset begin = 0;
    Offset end = 0;
  };
  std::array<std::optional<SourceRange>, kDmaChannels> dma_sources_{};
  Cycle stores_drained_at_ = 0;

  std::uint64_t wand_generation_ = 0;
};

/// Discrete-event simulator of a 2D mesh of cores with flat local stores.
///
/// Cores run their programs as cooperative fibers. The driver always resumes
/// the earliest pending event, so every memory effect is applied in global
/// cycle order; that ordering is what makes the simulated memory
/// linearizable at word granularity.
class Mesh {
 public:
  using Program = std::function<void(Core&)>;

  Mesh(std::uint32_t rows, std::uint32_t cols, CostModel cost = {}, MeshOptions options = {})
      : rows_(rows), cols_(cols), cost_(cost), options_(std::move(options)),
        rng_(options_.scheduler.seed) {
    if (rows == 0 || cols == 0) {
      throw Fault(FaultKind::config, "mesh needs at least one core");
    }
    if (rows > kMaxMeshDim || cols > kMaxMeshDim) {
      throw Fault(FaultKind::config, "mesh dimension exceeds the 6-bit coordinate space");
    }
    const auto& layout = options_.layout;
    if (layout.local_mem_size == 0 || layout.local_mem_size > (1u << kOffsetBits) ||
        layout.program_end > layout.stack_limit() || layout.stack_bytes > layout.local_mem_size) {
      throw Fault(FaultKind::config, "invalid local memory layout");
    }
    cost_.validate();
    const std::uint32_t n = rows * cols;
    stores_.reserve(n);
    cores_.reserve(n);
    for (PeId pe = 0; pe < n; ++pe) {
      stores_.emplace_back(layout);
      cores_.push_back(std::make_unique<Core>(*this, pe, coord_of(pe)));
    }
    watchers_.resize(n);
    write_version_.resize(n);
  }

  Mesh(const Mesh&) = delete;
  Mesh& operator=(const Mesh&) = delete;

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  std::uint32_t n_pes() const noexcept { return rows_ * cols_; }
  const CostModel& cost() const noexcept { return cost_; }
  const MeshOptions& options() const noexcept { return options_; }
  std::uint32_t local_mem_size() const noexcept { return options_.layout.local_mem_size; }

  CoreCoord coord_of(PeId pe) const {
    if (pe >= n_pes()) {
      throw Fault(FaultKind::range, "pe " + std::to_string(pe) + " out of range");
    }
    return {pe / cols_, pe % cols_};
  }

  PeId pe_of(CoreCoord c) const {
    if (c.row >= rows_ || c.col >= cols_) {
      throw Fault(FaultKind::bus, "core coordinate outside the mesh");
    }
    return c.row * cols_ + c.col;
  }

  GlobalAddr encode_addr(PeId pe, Offset offset) const {
    if (offset > kOffsetMask) {
      throw Fault(FaultKind::range, "offset exceeds the 20-bit address field");
    }
    return {coord_of(pe).core_id(), offset};
  }

  std::pair<PeId, Offset> decode_addr(GlobalAddr addr) const {
    return {pe_of(addr.coord()), addr.offset};
  }

  std::uint32_t distance(PeId a, PeId b) const { return manhattan(coord_of(a), coord_of(b)); }

  double cycles_to_seconds(Cycle c) const noexcept { return cost_.cycles_to_seconds(double(c)); }

  LocalStore& store(PeId pe) { return stores_.at(pe); }
  const LocalStore& store(PeId pe) const { return stores_.at(pe); }
  Core& core(PeId pe) { return *cores_.at(pe); }
  const Core& core(PeId pe) const { return *cores_.at(pe); }

  const std::vector<TraceRecord>& trace() const noexcept { return trace_; }
  void clear_trace() { trace_.clear(); }

  /// Run `program` on every core until all programs return.
  /// Throws the first program exception, or a stall Fault when the event
  /// queue drains while some program is still blocked.
  void run(const Program& program);

  /// Resolve an access of `size` bytes at `addr`; faults on misalignment or
  /// addresses outside any local store.
  PeId resolve(GlobalAddr addr, std::uint64_t size, std::uint32_t align) const {
    const CoreCoord c = addr.coord();
    if (c.row >= rows_ || c.col >= cols_) {
      throw Fault(FaultKind::bus, "core id " + std::to_string(addr.core_id) + " not on mesh");
    }
    if (align > 1 && addr.offset % align != 0) {
      std::ostringstream os;
      os << "address 0x" << std::hex << addr.offset << " not aligned to " << std::dec << align;
      throw Fault(FaultKind::alignment, os.str());
    }
    if (std::uint64_t{addr.offset} + size > local_mem_size()) {
      throw Fault(FaultKind::bus, "access beyond local store");
    }
    return pe_of(c);
  }

 private:
  friend class Core;

  enum EventClass : int { kDeliver = 0, kExecute = 1, kResume = 2 };

  struct Event {
    Cycle time;
    int cls;
    std::uint64_t key;
    std::uint64_t seq;
    std::function<void()> action;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      if (a.cls != b.cls) return a.cls > b.cls;
      if (a.key != b.key) return a.key > b.key;
      return a.seq > b.seq;
    }
  };

  void schedule(Cycle t, int cls, std::function<void()> action) {
    const std::uint64_t seq = seq_++;
    const std::uint64_t key = options_.scheduler.randomized ? rng_() : seq;
    queue_.push_back(Event{t, cls, key, seq, std::move(action)});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
  }

  bool must_yield(Cycle t) const noexcept {
    if (queue_.empty()) return false;
    const Event& top = queue_.front();
    return top.time < t || (top.time == t && top.cls < kResume);
  }

  Cycle jitter() {
    const Cycle j = options_.scheduler.jitter;
    if (!options_.scheduler.randomized || j == 0) return 0;
    return rng_() % (j + 1);
  }

  void record(TraceKind kind, Cycle t, PeId issuer, PeId target, Offset off, std::uint64_t n) {
    if (options_.trace) trace_.push_back({t, kind, issuer, target, off, n});
  }

  void resume(Core& c);
  void wake(Core& c, Cycle t, bool align);

  void apply_write(PeId target, Offset offset, std::span<const std::byte> data) {
    auto& bytes = stores_[target].bytes;
    std::memmove(bytes.data() + offset, data.data(), data.size());
    notify_watchers(target);
  }

  void notify_watchers(PeId target) {
    ++write_version_[target];
    auto& list = watchers_[target];
    if (list.empty()) return;
    std::vector<Core*> woken;
    woken.swap(list);
    for (Core* c : woken) wake(*c, now_, true);
  }

  void post_write(PeId issuer, PeId target, Offset offset, std::vector<std::byte> data,
                  Cycle deliver_at) {
    (void)issuer;
    schedule(deliver_at, kDeliver, [this, target, offset, payload = std::move(data)] {
      apply_write(target, offset, payload);
    });
  }

  void complete_dma(Core& c, std::uint32_t channel);

  std::uint32_t rows_;
  std::uint32_t cols_;
  CostModel cost_;
  MeshOptions options_;
  std::mt19937_64 rng_;

  std::vector<LocalStore> stores_;
  std::vector<std::unique_ptr<Core>> cores_;
  std::vector<std::vector<Core*>> watchers_;
  // Bumped on every write to a store; lets a spinner detect writes that
  // landed between its remote attempt and going to sleep.
  std::vector<std::uint64_t> write_version_;

  std::vector<Event> queue_;
  std::uint64_t seq_ = 0;
  Cycle now_ = 0;
  std::uint32_t finished_ = 0;

  std::uint32_t wand_entered_ = 0;
  Cycle wand_last_entry_ = 0;
  std::uint64_t wand_generation_ = 0;
  Cycle wand_release_ = 0;

  std::vector<TraceRecord> trace_;
};

// ---------------------------------------------------------------------------
// Core
// ---------------------------------------------------------------------------

inline const CostModel& Core::cost() const noexcept { return mesh_.cost(); }
inline LocalStore& Core::store() noexcept { return mesh_.store(id_); }
inline std::span<std::byte> Core::memory() noexcept { return mesh_.store(id_).bytes; }

inline void Core::suspend() { driver_ = std::move(driver_).resume(); }

inline void Core::yield_until(Cycle t) {
  mesh_.schedule(t, Mesh::kResume, [this, t] {
    now_ = std::max(now_, t);
    mesh_.resume(*this);
  });
  suspend();
}

inline void Core::block(const char* reason, std::optional<Cycle> timeout,
                        std::optional<PeId> watch) {
  blocked_ = true;
  wait_reason_ = reason;
  wake_at_.reset();
  if (watch) mesh_.watchers_[*watch].push_back(this);
  if (timeout) mesh_.wake(*this, *timeout, false);
  suspend();
  blocked_ = false;
  wait_reason_ = "";
  poll_anchor_.reset();
  if (watch) std::erase(mesh_.watchers_[*watch], this);
}

inline Cycle Core::align_to_poll(Cycle t) const noexcept {
  if (!poll_anchor_) return t;
  const Cycle p = std::max<Cycle>(1, to_cycles(cost().poll_cycles));
  const Cycle a = *poll_anchor_;
  if (t <= a) return a;
  return a + (t - a + p - 1) / p * p;
}

inline void Core::sync() {
  now_ += mesh_.jitter();
  if (now_ > mesh_.options_.max_cycles) {
    throw Fault(FaultKind::stall, "pe " + std::to_string(id_) + " exceeded the cycle limit");
  }
  if (mesh_.must_yield(now_)) yield_until(now_);
  service_interrupts();
}

inline void Core::service_interrupts() {
  if (in_isr_) return;
  while (!pending_irqs_.empty()) {
    const std::uint32_t arg = pending_irqs_.front();
    pending_irqs_.pop_front();
    in_isr_ = true;
    try {
      handler_(*this, arg);
    } catch (...) {
      in_isr_ = false;
      throw;
    }
    in_isr_ = false;
  }
}

inline void Core::check_local_write(Offset offset, std::uint64_t n) const {
  if (!mesh_.options_.strict) return;
  for (std::uint32_t ch = 0; ch < kDmaChannels; ++ch) {
    const auto& r = dma_sources_[ch];
    if (r && now_ < dma_[ch].completion_time && offset < r->end && offset + n > r->begin) {
      throw Fault(FaultKind::source_reuse,
                  "pe " + std::to_string(id_) + " wrote a buffer still read by DMA channel " +
                      std::to_string(ch));
    }
  }
}

inline Cycle Core::write(GlobalAddr dst, std::span<const std::byte> data) {
  const auto width = static_cast<std::uint32_t>(data.size());
  if (width == 0 || width > 8 || !std::has_single_bit(width)) {
    throw Fault(FaultKind::usage, "store width must be 1, 2, 4 or 8 bytes");
  }
  sync();
  const PeId target = mesh_.resolve(dst, width, width);
  const Cycle c = to_cycles(cost().store_cycles_per_dword);
  if (target == id_) {
    check_local_write(dst.offset, width);
    mesh_.apply_write(target, dst.offset, data);
  } else {
    const std::uint32_t hops = mesh_.distance(id_, target);
    const Cycle at = now_ + c + to_cycles(cost().write_latency_cycles) + cost().hop_latency(hops);
    mesh_.post_write(id_, target, dst.offset, {data.begin(), data.end()}, at);
    stores_drained_at_ = std::max(stores_drained_at_, at);
  }
  mesh_.record(TraceKind::write, now_, id_, target, dst.offset, width);
  now_ += c;
  return c;
}

inline std::uint64_t Core::read(GlobalAddr src, std::uint32_t width, Cycle* charged) {
  if (width == 0 || width > 8 || !std::has_single_bit(width)) {
    throw Fault(FaultKind::usage, "load width must be 1, 2, 4 or 8 bytes");
  }
  sync();
  const PeId target = mesh_.resolve(src, width, width);
  std::uint64_t value = 0;
  Cycle c = 0;
  mesh_.record(TraceKind::read, now_, id_, target, src.offset, width);
  if (target == id_) {
    std::memcpy(&value, memory().data() + src.offset, width);
    c = to_cycles(cost().load_extra_cycles);
    now_ += c;
  } else {
    const std::uint32_t hops = mesh_.distance(id_, target);
    c = to_cycles(cost().read_roundtrip_base) + cost().round_trip_hops(hops);
    const Cycle arrive =
        std::min(now_ + c, now_ + to_cycles(cost().write_latency_cycles) + cost().hop_latency(hops));
    mesh_.schedule(arrive, Mesh::kExecute, [this, target, src, width, &value] {
      std::memcpy(&value, mesh_.store(target).bytes.data() + src.offset, width);
    });
    now_ += c;
    yield_until(now_);
  }
  if (charged) *charged = c;
  return value;
}

inline Cycle Core::copy_out(Offset src, GlobalAddr dst, std::uint32_t nbytes) {
  sync();
  if (nbytes == 0) return 0;
  const PeId target = mesh_.resolve(dst, nbytes, 1);
  mesh_.resolve(local_addr(src), nbytes, 1);
  const bool aligned = src % 8 == 0 && dst.offset % 8 == 0;
  const double dwords = double((nbytes + 7) / 8);
  const Cycle c = to_cycles(dwords * cost().fast_path_cycles_per_dword() *
                            (aligned ? 1.0 : cost().alignment_penalty_factor));
  std::span<const std::byte> payload(memory().data() + src, nbytes);
  mesh_.record(TraceKind::copy_out, now_, id_, target, dst.offset, nbytes);
  if (target == id_) {
    check_local_write(dst.offset, nbytes);
    mesh_.apply_write(target, dst.offset, payload);
  } else {
    const std::uint32_t hops = mesh_.distance(id_, target);
    const Cycle at = now_ + c + to_cycles(cost().write_latency_cycles) + cost().hop_latency(hops);
    mesh_.post_write(id_, target, dst.offset, {payload.begin(), payload.end()}, at);
    stores_drained_at_ = std::max(stores_drained_at_, at);
  }
  now_ += c;
  return c;
}

inline Cycle Core::copy_in(GlobalAddr src, Offset dst, std::uint32_t nbytes) {
  sync();
  if (nbytes == 0) return 0;
  const PeId target = mesh_.resolve(src, nbytes, 1);
  mesh_.resolve(local_addr(dst), nbytes, 1);
  const bool aligned = dst % 8 == 0 && src.offset % 8 == 0;
  const double dwords = double((nbytes + 7) / 8);
  const double penalty = aligned ? 1.0 : cost().alignment_penalty_factor;
  mesh_.record(TraceKind::copy_in, now_, id_, target, src.offset, nbytes);
  if (target == id_) {
    const Cycle c = to_cycles(dwords * cost().fast_path_cycles_per_dword() * penalty);
    check_local_write(dst, nbytes);
    std::memmove(memory().data() + dst, memory().data() + src.offset, nbytes);
    now_ += c;
    return c;
  }
  const std::uint32_t hops = mesh_.distance(id_, target);
  const double per_dword = cost().read_roundtrip_base + double(cost().round_trip_hops(hops)) +
                           cost().store_cycles_per_dword;
  const Cycle c = to_cycles(dwords * per_dword * penalty);
  std::vector<std::byte> buffer(nbytes);
  const Cycle arrive =
      now_ + std::min(c, to_cycles(cost().write_latency_cycles) + cost().hop_latency(hops));
  mesh_.schedule(arrive, Mesh::kExecute, [this, target, src, &buffer] {
    const auto& bytes = mesh_.store(target).bytes;
    std::memcpy(buffer.data(), bytes.data() + src.offset, buffer.size());
  });
  now_ += c;
  yield_until(now_);
  check_local_write(dst, nbytes);
  mesh_.apply_write(id_, dst, buffer);
  return c;
}

inline std::uint32_t Core::testset(GlobalAddr target_addr, std::uint32_t value) {
  sync();
  const PeId target = mesh_.resolve(target_addr, 4, 4);
  std::uint32_t old = 0;
  auto exec = [this, target, target_addr, value, &old] {
    auto* word = mesh_.store(target).bytes.data() + target_addr.offset;
    std::memcpy(&old, word, 4);
    if (old == 0) mesh_.apply_write(target, target_addr.offset, std::as_bytes(std::span(&value, 1)));
  };
  mesh_.record(TraceKind::testset, now_, id_, target, target_addr.offset, 4);
  if (target == id_) {
    exec();
    now_ += to_cycles(cost().testset_roundtrip_cycles);
    return old;
  }
  const std::uint32_t hops = mesh_.distance(id_, target);
  const Cycle c = to_cycles(cost().testset_roundtrip_cycles) + cost().round_trip_hops(hops);
  const Cycle arrive =
      now_ + std::min(c, to_cycles(cost().write_latency_cycles) + cost().hop_latency(hops));
  mesh_.schedule(arrive, Mesh::kExecute, exec);
  now_ += c;
  yield_until(now_);
  return old;
}

namespace detail {

// Byte extent [lo, hi) touched by a strided 2D walk starting at `base`.
inline std::pair<std::int64_t, std::int64_t> dma_extent(std::int64_t base, std::uint32_t inner,
                                                        std::uint32_t outer, std::int64_t istride,
                                                        std::int64_t ostride,
                                                        std::uint32_t elem) {
  std::int64_t lo = base;
  std::int64_t hi = base;
  for (std::int64_t o : {std::int64_t{0}, std::int64_t{outer} - 1}) {
    for (std::int64_t i : {std::int64_t{0}, std::int64_t{inner} - 1}) {
      const std::int64_t p = base + o * ostride + i * istride;
      lo = std::min(lo, p);
      hi = std::max(hi, p + elem);
    }
  }
  return {lo, hi};
}

}  // namespace detail

inline DmaStart Core::dma_start(const DmaDescriptor& d) {
  if (d.channel >= kDmaChannels) throw Fault(FaultKind::usage, "DMA channel must be 0 or 1");
  if (d.inner_count == 0 || d.outer_count == 0) {
    throw Fault(FaultKind::usage, "DMA counts must be at least 1");
  }
  if (d.elem_size == 0 || d.elem_size > 8 || !std::has_single_bit(d.elem_size)) {
    throw Fault(FaultKind::usage, "DMA element size must be 1, 2, 4 or 8");
  }
  auto check = [&](GlobalAddr a, std::int64_t is, std::int64_t os) {
    const auto [lo, hi] = detail::dma_extent(a.offset, d.inner_count, d.outer_count, is, os,
                                             d.elem_size);
    if (lo < 0 || is % d.elem_size != 0 || os % d.elem_size != 0) {
      throw Fault(FaultKind::alignment, "DMA stride or base not element aligned");
    }
    mesh_.resolve({a.core_id, static_cast<Offset>(lo)}, std::uint64_t(hi - lo), 1);
    if (a.offset % d.elem_size != 0) throw Fault(FaultKind::alignment, "DMA base misaligned");
    return std::pair{static_cast<Offset>(lo), static_cast<Offset>(hi)};
  };
  const auto src_range = check(d.src, d.src_inner_stride, d.src_outer_stride);
  check(d.dst, d.dst_inner_stride, d.dst_outer_stride);

  sync();
  auto& ch = dma_[d.channel];
  if (now_ < ch.completion_time) {
    now_ += to_cycles(cost().store_cycles_per_dword);
    return DmaStart::channel_busy;
  }
  const PeId src_pe = mesh_.pe_of(d.src.coord());
  const PeId dst_pe = mesh_.pe_of(d.dst.coord());
  const Cycle setup = to_cycles(cost().dma_setup_cycles);
  Cycle done = now_ + setup + to_cycles(double(d.element_count()) * cost().dma_cycles_per_dword);
  if (src_pe != dst_pe) {
    done += to_cycles(cost().write_latency_cycles) + cost().hop_latency(mesh_.distance(src_pe, dst_pe));
  }
  ch.state = ChannelState::busy;
  ch.completion_time = done;
  ch.active = d;
  if (src_pe == id_) {
    dma_sources_[d.channel] = SourceRange{src_range.first, src_range.second};
  } else {
    dma_sources_[d.channel].reset();
  }
  mesh_.record(TraceKind::dma, now_, id_, dst_pe, d.dst.offset, d.total_bytes());
  const std::uint32_t channel = d.channel;
  mesh_.schedule(done, Mesh::kDeliver, [this, channel] { mesh_.complete_dma(*this, channel); });
  now_ += setup;
  return DmaStart::accepted;
}

inline ChannelState Core::dma_poll(std::uint32_t channel) {
  if (channel >= kDmaChannels) throw Fault(FaultKind::usage, "DMA channel must be 0 or 1");
  sync();
  const auto state = now_ < dma_[channel].completion_time ? ChannelState::busy : ChannelState::idle;
  now_ += to_cycles(cost().poll_cycles);
  return state;
}

inline void Core::poll_until(Cycle ready) {
  sync();
  const Cycle p = std::max<Cycle>(1, to_cycles(cost().poll_cycles));
  const Cycle anchor = now_;
  for (;;) {
    const bool done = now_ >= ready;
    now_ += p;
    if (done) return;
    poll_anchor_ = anchor;
    block("poll", align_to_poll(ready), std::nullopt);
    service_interrupts();
    sync();
  }
}

inline void Core::dma_wait_idle(std::uint32_t channel) {
  if (channel >= kDmaChannels) throw Fault(FaultKind::usage, "DMA channel must be 0 or 1");
  poll_until(dma_[channel].completion_time);
}

inline void Core::wait_stores_delivered() {
  sync();
  if (now_ >= stores_drained_at_) return;
  poll_until(stores_drained_at_);
}

template <class Pred>
void Core::wait_local(Pred&& pred) {
  sync();
  const Cycle p = std::max<Cycle>(1, to_cycles(cost().poll_cycles));
  const Cycle anchor = now_;
  for (;;) {
    const bool ok = pred();
    now_ += p;
    if (ok) return;
    poll_anchor_ = anchor;
    block("wait_local", std::nullopt, id_);
    service_interrupts();
    sync();
  }
}

template <class Attempt>
void Core::spin_on(PeId watched, Attempt&& attempt) {
  const Cycle p = std::max<Cycle>(1, to_cycles(cost().poll_cycles));
  for (;;) {
    const std::uint64_t version = mesh_.write_version_[watched];
    if (attempt()) return;
    const Cycle anchor = now_;
    now_ += p;
    if (mesh_.write_version_[watched] != version) continue;
    poll_anchor_ = anchor;
    block("spin", std::nullopt, watched);
    service_interrupts();
  }
}

inline void Core::wand() {
  sync();
  mesh_.record(TraceKind::wand, now_, id_, id_, 0, 0);
  if (mesh_.n_pes() == 1) return;
  const std::uint64_t gen = mesh_.wand_generation_;
  mesh_.wand_last_entry_ = mesh_.wand_entered_ == 0 ? now_ : std::max(mesh_.wand_last_entry_, now_);
  if (++mesh_.wand_entered_ == mesh_.n_pes()) {
    const Cycle release = mesh_.wand_last_entry_ + to_cycles(cost().wand_barrier_cycles);
    mesh_.wand_entered_ = 0;
    mesh_.wand_release_ = release;
    ++mesh_.wand_generation_;
    for (auto& other : mesh_.cores_) {
      if (other.get() != this && other->blocked_ && other->wand_generation_ == gen + 1) {
        mesh_.wake(*other, release, false);
      }
    }
    yield_until(release);
    return;
  }
  wand_generation_ = gen + 1;
  while (mesh_.wand_generation_ == gen) {
    block("wand", std::nullopt, std::nullopt);
    service_interrupts();
  }
  wand_generation_ = 0;
  now_ = std::max(now_, mesh_.wand_release_);
}

inline void Core::raise_interrupt(PeId target, std::uint32_t arg) {
  sync();
  (void)mesh_.coord_of(target);
  const Cycle c = to_cycles(cost().store_cycles_per_dword);
  Cycle at = now_ + c + to_cycles(cost().interrupt_latency_cycles);
  if (target != id_) {
    at += to_cycles(cost().write_latency_cycles) + cost().hop_latency(mesh_.distance(id_, target));
  }
  mesh_.record(TraceKind::interrupt, now_, id_, target, 0, 0);
  mesh_.schedule(at, Mesh::kDeliver, [this, target, arg, at] {
    Core& t = mesh_.core(target);
    if (!t.handler_) {
      throw Fault(FaultKind::interrupt, "pe " + std::to_string(target) + " has no interrupt handler");
    }
    t.pending_irqs_.push_back(arg);
    mesh_.wake(t, at, false);
  });
  now_ += c;
}

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

inline void Mesh::resume(Core& c) {
  c.fiber_ = std::move(c.fiber_).resume();
  if (c.error_) std::rethrow_exception(c.error_);
}

inline void Mesh::wake(Core& c, Cycle t, bool align) {
  if (!c.blocked_) return;
  t = std::max(align ? c.align_to_poll(t) : t, c.now_);
  if (c.wake_at_ && *c.wake_at_ <= t) return;
  c.wake_at_ = t;
  const std::uint64_t token = ++c.wake_token_;
  schedule(t, kResume, [this, &c, token, t] {
    if (!c.blocked_ || c.wake_token_ != token) return;
    c.now_ = std::max(c.now_, t);
    resume(c);
  });
}

inline void Mesh::complete_dma(Core& c, std::uint32_t channel) {
  auto& ch = c.dma_[channel];
  if (!ch.active) return;
  const DmaDescriptor d = *ch.active;
  const PeId src_pe = pe_of(d.src.coord());
  const PeId dst_pe = pe_of(d.dst.coord());
  const auto& src = stores_[src_pe].bytes;
  std::vector<std::byte> staged(d.total_bytes());
  std::size_t k = 0;
  for (std::uint32_t o = 0; o < d.outer_count; ++o) {
    for (std::uint32_t i = 0; i < d.inner_count; ++i, k += d.elem_size) {
      const std::int64_t s = d.src.offset + std::int64_t{o} * d.src_outer_stride +
                             std::int64_t{i} * d.src_inner_stride;
      std::memcpy(staged.data() + k, src.data() + s, d.elem_size);
    }
  }
  auto& dst = stores_[dst_pe].bytes;
  k = 0;
  for (std::uint32_t o = 0; o < d.outer_count; ++o) {
    for (std::uint32_t i = 0; i < d.inner_count; ++i, k += d.elem_size) {
      const std::int64_t s = d.dst.offset + std::int64_t{o} * d.dst_outer_stride +
                             std::int64_t{i} * d.dst_inner_stride;
      std::memcpy(dst.data() + s, staged.data() + k, d.elem_size);
    }
  }
  ch.state = ChannelState::idle;
  ch.active.reset();
  c.dma_sources_[channel].reset();
  notify_watchers(dst_pe);
}

inline void Mesh::run(const Program& program) {
  namespace bc = boost::context;
  finished_ = 0;
  for (auto& cp : cores_) {
    Core& c = *cp;
    c.program_done_ = false;
    c.error_ = nullptr;
    c.fiber_ = bc::fiber(std::allocator_arg, bc::fixedsize_stack(options_.fiber_stack_bytes),
                         [this, &c, &program](bc::fiber&& driver) {
                           c.driver_ = std::move(driver);
                           try {
                             program(c);
                             c.program_done_ = true;
                             ++finished_;
                             // Keep servicing interrupts for cores still running.
                             while (finished_ < n_pes()) {
                               c.block("idle", std::nullopt, std::nullopt);
                               c.service_interrupts();
                             }
                           } catch (const bc::detail::forced_unwind&) {
                             throw;
                           } catch (...) {
                             c.error_ = std::current_exception();
                           }
                           return std::move(c.driver_);
                         });
    schedule(c.now_, kResume, [this, &c] { resume(c); });
  }

  struct Cleanup {
    Mesh& m;
    ~Cleanup() {
      m.queue_.clear();
      for (auto& w : m.watchers_) w.clear();
      for (auto& cp : m.cores_) {
        cp->fiber_ = {};
        cp->driver_ = {};
        cp->blocked_ = false;
        cp->wake_at_.reset();
        cp->pending_irqs_.clear();
        cp->in_isr_ = false;
      }
      m.wand_entered_ = 0;
    }
  } cleanup{*this};

  while (!queue_.empty()) {
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Event ev = std::move(queue_.back());
    queue_.pop_back();
    now_ = ev.time;
    ev.action();
    if (finished_ == n_pes()) {
      // Idle cores only service interrupts; wake them so they can exit.
      for (auto& cp : cores_) {
        if (cp->blocked_) wake(*cp, std::max(now_, cp->now_), false);
      }
    }
  }

  std::ostringstream stalled;
  for (auto& cp : cores_) {
    if (!cp->program_done_) {
      stalled << " pe " << cp->id_ << " blocked in " << cp->wait_reason_ << " at cycle "
              << cp->now_ << ";";
    }
  }
  const std::string report = stalled.str();
  if (!report.empty()) throw Fault(FaultKind::stall, "no runnable event:" + report);
}

}  // namespace eshmem::mesh

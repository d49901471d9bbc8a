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

#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "eshmem/collectives/active_set.hpp"
#include "eshmem/config.hpp"
#include "eshmem/mesh/mesh.hpp"
#include "eshmem/shmem/symmetric_heap.hpp"

namespace eshmem::shmem {

using mesh::Core;
using mesh::Cycle;
using mesh::GlobalAddr;
using mesh::PeId;

/// Gets larger than this many bytes interrupt the owner and have it put the
/// data back; smaller ones read directly.
inline constexpr std::uint32_t kIpiGetThreshold = 64;

enum class Cmp { eq, ne, lt, le, gt, ge };

enum class AtomicOp { fetch, set, swap, cswap, add, inc, fetch_add, fetch_inc };

template <class T>
concept AtomicElement = std::is_same_v<T, std::int32_t> || std::is_same_v<T, std::int64_t> ||
                        std::is_same_v<T, std::uint32_t> || std::is_same_v<T, std::uint64_t> ||
                        std::is_same_v<T, float> || std::is_same_v<T, double>;

// One lock word per element class on every core.
template <AtomicElement T>
constexpr std::uint32_t atomic_lock_index() noexcept {
  if constexpr (std::is_floating_point_v<T>) {
    return sizeof(T) == 4 ? 2 : 3;
  } else {
    return sizeof(T) == 4 ? 0 : 1;
  }
}

inline constexpr std::uint32_t kAtomicLockTypes = 4;

/// Runtime-private symmetric words, placed right after the program image.
struct RuntimeLayout {
  Offset barrier_psync = 0;
  Offset atomic_locks = 0;
  Offset counter_barrier = 0;  // counter word, then release word
  Offset ipi_descriptor = 0;   // src offset, dst address, nbytes, flag address
  Offset ipi_flag = 0;
  Offset end = 0;

  static RuntimeLayout at(Offset base) {
    RuntimeLayout l;
    Offset p = (base + 7) / 8 * 8;
    l.barrier_psync = p;
    p += 8 * coll::BARRIER_SYNC_SIZE;
    l.atomic_locks = p;
    p += 8 * kAtomicLockTypes;
    l.counter_barrier = p;
    p += 16;
    l.ipi_descriptor = p;
    p += 32;
    l.ipi_flag = p;
    p += 8;
    l.end = p;
    return l;
  }
};

/// Per-PE runtime state.
struct PeContext {
  PeId pe_id = 0;
  std::uint32_t n_pes = 0;
  FeatureFlags flags;
  RuntimeLayout layout;
  std::vector<PeId> barrier_partners;  // (pe + 2^r) mod n for each round r
  std::map<Offset, std::uint64_t> epochs;
  std::uint32_t next_dma_channel = 0;
  std::vector<Offset> held_locks;
};

/// OpenSHMEM-style runtime bound to one simulated core.
///
/// Symmetric objects are named by their local byte offset, which is the same
/// on every PE. Typed routines are thin wrappers over the (nelems, elem_size)
/// forms.
class Context {
 public:
  explicit Context(Core& core, FeatureFlags flags = {}) : core_(core), heap_(core.store()) {
    state_.flags = flags;
  }
  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;

  void init();
  bool initialized() const noexcept { return initialized_; }

  PeId my_pe() const noexcept { return state_.pe_id; }
  std::uint32_t n_pes() const noexcept { return state_.n_pes; }
  GlobalAddr ptr(Offset sym_offset, PeId pe) const;

  Core& core() noexcept { return core_; }
  const PeContext& state() const noexcept { return state_; }
  const FeatureFlags& flags() const noexcept { return state_.flags; }
  const RuntimeLayout& layout() const noexcept { return state_.layout; }
  const SymmetricHeap& heap() const noexcept { return heap_; }

  // --- memory management (collective; each implies a barrier) -------------
  SymAlloc malloc(std::uint32_t size);
  SymAlloc align(std::uint32_t alignment, std::uint32_t size);
  void free(const SymAlloc& a);
  SymAlloc realloc(const SymAlloc& a, std::uint32_t new_size);

  // --- local memory --------------------------------------------------------
  std::span<std::byte> local() noexcept { return core_.memory(); }

  template <class T>
  std::span<T> view(Offset offset, std::size_t count) {
    return {reinterpret_cast<T*>(core_.memory().data() + offset), count};
  }

  template <class T>
  T load(Offset offset) {
    return core_.load_value<T>(core_.local_addr(offset));
  }

  template <class T>
  void store(Offset offset, T value) {
    core_.store_value<T>(core_.local_addr(offset), value);
  }

  // --- blocking RMA --------------------------------------------------------
  void put(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size, PeId pe);
  void get(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size, PeId pe);
  void putmem(Offset dest, Offset src, std::size_t nbytes, PeId pe) { put(dest, src, nbytes, 1, pe); }
  void getmem(Offset dest, Offset src, std::size_t nbytes, PeId pe) { get(dest, src, nbytes, 1, pe); }

  template <class T>
  void put(Offset dest, Offset src, std::size_t nelems, PeId pe) {
    put(dest, src, nelems, sizeof(T), pe);
  }
  template <class T>
  void get(Offset dest, Offset src, std::size_t nelems, PeId pe) {
    get(dest, src, nelems, sizeof(T), pe);
  }

  /// Single-element store to a remote symmetric variable.
  template <class T>
  void p(Offset dest, T value, PeId pe) {
    check_pe(pe);
    core_.advance(mesh::to_cycles(core_.cost().call_overhead_cycles));
    core_.store_value<T>(ptr(dest, pe), value);
  }

  template <class T>
  T g(Offset src, PeId pe) {
    check_pe(pe);
    core_.advance(mesh::to_cycles(core_.cost().call_overhead_cycles));
    return core_.load_value<T>(ptr(src, pe));
  }

  // --- non-blocking RMA (DMA) ----------------------------------------------
  void put_nbi(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size, PeId pe);
  void get_nbi(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size, PeId pe);

  // --- ordering ------------------------------------------------------------
  void quiet();
  void fence() { quiet(); }

  // --- point-to-point synchronization -------------------------------------
  template <class T>
  void wait_until(Offset addr, Cmp cmp, T value);

  // --- atomics -------------------------------------------------------------
  template <AtomicElement T>
  std::optional<T> atomic(AtomicOp op, Offset target, T operand, T cond, PeId pe);

  template <AtomicElement T>
  T atomic_fetch(Offset target, PeId pe) {
    return *atomic<T>(AtomicOp::fetch, target, T{}, T{}, pe);
  }
  template <AtomicElement T>
  void atomic_set(Offset target, T value, PeId pe) {
    atomic<T>(AtomicOp::set, target, value, T{}, pe);
  }
  template <AtomicElement T>
  T atomic_swap(Offset target, T value, PeId pe) {
    return *atomic<T>(AtomicOp::swap, target, value, T{}, pe);
  }
  template <AtomicElement T>
  T atomic_compare_swap(Offset target, T cond, T value, PeId pe) {
    return *atomic<T>(AtomicOp::cswap, target, value, cond, pe);
  }
  template <AtomicElement T>
  void atomic_add(Offset target, T value, PeId pe) {
    atomic<T>(AtomicOp::add, target, value, T{}, pe);
  }
  template <AtomicElement T>
  void atomic_inc(Offset target, PeId pe) {
    atomic<T>(AtomicOp::inc, target, T{}, T{}, pe);
  }
  template <AtomicElement T>
  T atomic_fetch_add(Offset target, T value, PeId pe) {
    return *atomic<T>(AtomicOp::fetch_add, target, value, T{}, pe);
  }
  template <AtomicElement T>
  T atomic_fetch_inc(Offset target, PeId pe) {
    return *atomic<T>(AtomicOp::fetch_inc, target, T{}, T{}, pe);
  }

  // --- synchronization used by collectives --------------------------------
  void barrier_all();

  /// Reserve `count` consecutive sequence numbers for a call that uses the
  /// symmetric sync array at `psync`. Every member of a collective makes the
  /// same sequence of calls, so the numbers agree across PEs.
  std::uint64_t next_epoch(Offset psync, std::uint64_t count = 1) {
    auto& e = state_.epochs[psync];
    const std::uint64_t first = e + 1;
    e += count;
    return first;
  }

  void call_overhead() { core_.advance(mesh::to_cycles(core_.cost().call_overhead_cycles)); }

  void check_pe(PeId pe) const {
    if (pe >= state_.n_pes) {
      throw Fault(FaultKind::range, "pe " + std::to_string(pe) + " out of range");
    }
  }

  PeContext& mutable_state() noexcept { return state_; }

 private:
  void require_init() const {
    if (!initialized_) throw Fault(FaultKind::usage, "runtime used before init");
  }
  void check_transfer(Offset dest, Offset src, std::size_t nbytes, std::uint32_t elem_size) const;
  std::uint32_t acquire_dma_channel();
  void ipi_get(Offset dest, Offset src, std::uint32_t nbytes, PeId pe);
  static void ipi_handler(Core& core, std::uint32_t arg);

  Core& core_;
  SymmetricHeap heap_;
  PeContext state_;
  bool initialized_ = false;
};

// ---------------------------------------------------------------------------

inline void Context::init() {
  if (initialized_) throw Fault(FaultKind::usage, "init called twice");
  auto& st = core_.store();
  state_.pe_id = core_.pe();
  state_.n_pes = core_.mesh().n_pes();
  state_.layout = RuntimeLayout::at(st.program_end);
  if (state_.layout.end > st.stack_limit) {
    throw Fault(FaultKind::range, "no room for runtime state after the program image");
  }
  std::memset(st.bytes.data() + state_.layout.barrier_psync, 0,
              state_.layout.end - state_.layout.barrier_psync);
  st.heap_base = state_.layout.end;
  st.heap_brk = st.heap_base;
  const std::uint32_t rounds = coll::ceil_log2(state_.n_pes);
  state_.barrier_partners.clear();
  for (std::uint32_t r = 0; r < rounds; ++r) {
    state_.barrier_partners.push_back((state_.pe_id + (1u << r)) % state_.n_pes);
  }
  if (state_.flags.use_ipi_get) core_.set_interrupt_handler(&Context::ipi_handler);
  initialized_ = true;
  barrier_all();
}

inline GlobalAddr Context::ptr(Offset sym_offset, PeId pe) const {
  check_pe(pe);
  return core_.mesh().encode_addr(pe, sym_offset);
}

inline SymAlloc Context::malloc(std::uint32_t size) { return align(kDefaultAlignment, size); }

inline SymAlloc Context::align(std::uint32_t alignment, std::uint32_t size) {
  require_init();
  const SymAlloc a = heap_.allocate(size, alignment);
  barrier_all();
  return a;
}

inline void Context::free(const SymAlloc& a) {
  require_init();
  heap_.free(a);
}

inline SymAlloc Context::realloc(const SymAlloc& a, std::uint32_t new_size) {
  require_init();
  const SymAlloc r = heap_.reallocate(a, new_size);
  barrier_all();
  return r;
}

inline void Context::check_transfer(Offset dest, Offset src, std::size_t nbytes,
                                    std::uint32_t elem_size) const {
  if (elem_size == 0 || elem_size > 16 || !std::has_single_bit(elem_size)) {
    throw Fault(FaultKind::usage, "element size must be 1, 2, 4, 8 or 16 bytes");
  }
  const std::uint32_t align = std::min<std::uint32_t>(elem_size, 8);
  if (dest % align != 0 || src % align != 0) {
    throw Fault(FaultKind::alignment, "buffer not aligned to its element size");
  }
  const std::uint64_t limit = core_.mesh().local_mem_size();
  if (std::uint64_t{dest} + nbytes > limit || std::uint64_t{src} + nbytes > limit) {
    throw Fault(FaultKind::range, "transfer extends beyond the local store");
  }
}

inline void Context::put(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size,
                         PeId pe) {
  require_init();
  check_pe(pe);
  const std::size_t nbytes = nelems * elem_size;
  check_transfer(dest, src, nbytes, elem_size);
  call_overhead();
  core_.copy_out(src, ptr(dest, pe), static_cast<std::uint32_t>(nbytes));
}

inline void Context::get(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size,
                         PeId pe) {
  require_init();
  check_pe(pe);
  const std::size_t nbytes = nelems * elem_size;
  check_transfer(dest, src, nbytes, elem_size);
  call_overhead();
  const auto n = static_cast<std::uint32_t>(nbytes);
  if (pe != state_.pe_id && state_.flags.use_ipi_get && n > kIpiGetThreshold) {
    ipi_get(dest, src, n, pe);
    return;
  }
  core_.copy_in(ptr(src, pe), dest, n);
}

// The requester publishes a descriptor in its own store and interrupts the
// owner, whose handler reads the descriptor and runs the fast put back.
inline void Context::ipi_get(Offset dest, Offset src, std::uint32_t nbytes, PeId pe) {
  const auto& l = state_.layout;
  store<std::uint64_t>(l.ipi_flag, 0);
  store<std::uint64_t>(l.ipi_descriptor, src);
  store<std::uint64_t>(l.ipi_descriptor + 8, ptr(dest, state_.pe_id).packed());
  store<std::uint64_t>(l.ipi_descriptor + 16, nbytes);
  store<std::uint64_t>(l.ipi_descriptor + 24, ptr(l.ipi_flag, state_.pe_id).packed());
  core_.raise_interrupt(pe, ptr(l.ipi_descriptor, state_.pe_id).packed());
  auto* flag = core_.memory().data() + l.ipi_flag;
  core_.wait_local([flag] {
    std::uint64_t v;
    std::memcpy(&v, flag, 8);
    return v != 0;
  });
}

inline void Context::ipi_handler(Core& core, std::uint32_t arg) {
  const GlobalAddr desc = GlobalAddr::unpack(arg);
  const auto src = static_cast<Offset>(core.load_value<std::uint64_t>(desc));
  const auto dst = GlobalAddr::unpack(static_cast<std::uint32_t>(core.load_value<std::uint64_t>(desc + 8)));
  const auto nbytes = static_cast<std::uint32_t>(core.load_value<std::uint64_t>(desc + 16));
  const auto flag = GlobalAddr::unpack(static_cast<std::uint32_t>(core.load_value<std::uint64_t>(desc + 24)));
  core.copy_out(src, dst, nbytes);
  core.store_value<std::uint64_t>(flag, 1);
}

inline std::uint32_t Context::acquire_dma_channel() {
  const std::uint32_t first = state_.next_dma_channel;
  for (std::uint32_t k = 0; k < mesh::kDmaChannels; ++k) {
    const std::uint32_t ch = (first + k) % mesh::kDmaChannels;
    if (core_.dma_poll(ch) == mesh::ChannelState::idle) {
      state_.next_dma_channel = (ch + 1) % mesh::kDmaChannels;
      return ch;
    }
  }
  // Both busy: wait for whichever finishes first.
  const std::uint32_t ch =
      core_.dma_channel(0).completion_time <= core_.dma_channel(1).completion_time ? 0 : 1;
  core_.dma_wait_idle(ch);
  state_.next_dma_channel = (ch + 1) % mesh::kDmaChannels;
  return ch;
}

namespace detail {

inline std::uint32_t dma_elem_size(Offset a, Offset b, std::size_t nbytes) {
  for (std::uint32_t w : {8u, 4u, 2u}) {
    if (a % w == 0 && b % w == 0 && nbytes % w == 0) return w;
  }
  return 1;
}

}  // namespace detail

inline void Context::put_nbi(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size,
                             PeId pe) {
  require_init();
  check_pe(pe);
  const std::size_t nbytes = nelems * elem_size;
  check_transfer(dest, src, nbytes, elem_size);
  call_overhead();
  if (nbytes == 0) return;
  const std::uint32_t w = detail::dma_elem_size(dest, src, nbytes);
  const std::uint32_t ch = acquire_dma_channel();
  const auto desc = mesh::DmaDescriptor::contiguous(ch, ptr(src, state_.pe_id), ptr(dest, pe),
                                                    static_cast<std::uint32_t>(nbytes / w), w);
  core_.dma_start(desc);
}

inline void Context::get_nbi(Offset dest, Offset src, std::size_t nelems, std::uint32_t elem_size,
                             PeId pe) {
  require_init();
  check_pe(pe);
  const std::size_t nbytes = nelems * elem_size;
  check_transfer(dest, src, nbytes, elem_size);
  call_overhead();
  if (nbytes == 0) return;
  const std::uint32_t w = detail::dma_elem_size(dest, src, nbytes);
  const std::uint32_t ch = acquire_dma_channel();
  const auto desc = mesh::DmaDescriptor::contiguous(ch, ptr(src, pe), ptr(dest, state_.pe_id),
                                                    static_cast<std::uint32_t>(nbytes / w), w);
  core_.dma_start(desc);
}

// Stores to each destination are delivered in issue order, so waiting for
// idle DMA channels and drained stores also serves as fence.
inline void Context::quiet() {
  core_.dma_wait_idle(0);
  core_.dma_wait_idle(1);
  core_.wait_stores_delivered();
}

namespace detail {

// Integer read-modify-write wraps like the hardware adder.
template <class T>
T wrapping_add(T a, T b) {
  if constexpr (std::is_integral_v<T>) {
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(static_cast<U>(a) + static_cast<U>(b)));
  } else {
    return static_cast<T>(a + b);
  }
}

template <class T>
bool compare(T lhs, Cmp cmp, T rhs) {
  switch (cmp) {
    case Cmp::eq: return lhs == rhs;
    case Cmp::ne: return lhs != rhs;
    case Cmp::lt: return lhs < rhs;
    case Cmp::le: return lhs <= rhs;
    case Cmp::gt: return lhs > rhs;
    case Cmp::ge: return lhs >= rhs;
  }
  return false;
}

}  // namespace detail

template <class T>
void Context::wait_until(Offset addr, Cmp cmp, T value) {
  static_assert(std::is_trivially_copyable_v<T> && sizeof(T) <= 8);
  require_init();
  core_.mesh().resolve(core_.local_addr(addr), sizeof(T), sizeof(T));
  const std::byte* word = core_.memory().data() + addr;
  core_.wait_local([word, cmp, value] {
    T current;
    std::memcpy(&current, word, sizeof(T));
    return detail::compare(current, cmp, value);
  });
}

template <AtomicElement T>
std::optional<T> Context::atomic(AtomicOp op, Offset target, T operand, T cond, PeId pe) {
  require_init();
  check_pe(pe);
  if (target % sizeof(T) != 0) throw Fault(FaultKind::alignment, "atomic target misaligned");
  if constexpr (std::is_floating_point_v<T>) {
    if (op != AtomicOp::fetch && op != AtomicOp::set && op != AtomicOp::swap) {
      throw Fault(FaultKind::usage, "floating-point atomics support fetch, set and swap only");
    }
  }
  call_overhead();
  const GlobalAddr addr = ptr(target, pe);
  core_.mesh().resolve(addr, sizeof(T), sizeof(T));
  // Single loads and stores complete in one cycle at the owner: implicitly atomic.
  if (op == AtomicOp::fetch) return core_.load_value<T>(addr);
  if (op == AtomicOp::set) {
    core_.store_value<T>(addr, operand);
    return std::nullopt;
  }

  const GlobalAddr lock = ptr(state_.layout.atomic_locks + 8 * atomic_lock_index<T>(), pe);
  const std::uint32_t tag = state_.pe_id + 1;
  core_.spin_on(pe, [&] { return core_.testset(lock, tag) == 0; });
  const T old = core_.load_value<T>(addr);
  std::optional<T> next;
  std::optional<T> result;
  switch (op) {
    case AtomicOp::swap: next = operand; result = old; break;
    case AtomicOp::cswap:
      if (old == cond) next = operand;
      result = old;
      break;
    case AtomicOp::add: next = detail::wrapping_add(old, operand); break;
    case AtomicOp::inc: next = detail::wrapping_add(old, T{1}); break;
    case AtomicOp::fetch_add: next = detail::wrapping_add(old, operand); result = old; break;
    case AtomicOp::fetch_inc: next = detail::wrapping_add(old, T{1}); result = old; break;
    default: break;
  }
  if (next) core_.store_value<T>(addr, *next);
  core_.store_value<std::uint32_t>(lock, 0);
  return result;
}

}  // namespace eshmem::shmem

#include "eshmem/collectives/barrier.hpp"

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

// Randomized equivalence check: every RMA op and collective runs on a
// 16-core mesh under a seeded schedule, and each destination buffer is
// compared byte for byte with a sequential model computed on the host.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace eshmem::testing {

struct PropertyCase {
  std::uint32_t pe_size = 1;
  std::size_t nelems = 0;
  std::uint64_t seed = 0;
};

struct PropertyResult {
  std::size_t mismatches = 0;
  std::vector<std::string> failures;
};

namespace prop {

inline constexpr std::uint32_t kRows = 4, kCols = 4, kPes = 16;
inline constexpr std::byte kSentinel{0xEE};

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t draw(std::uint64_t seed, std::uint64_t pe, std::uint64_t i, std::uint64_t salt) {
  return mix(mix(mix(seed ^ (salt << 56)) ^ pe) ^ i);
}

// Members: pe_start + k * 2^log_stride, chosen from the seed.
inline coll::ActiveSet choose_set(std::uint32_t n, std::uint64_t seed) {
  const std::uint32_t log_stride = (n <= kPes / 2 && (seed & 4)) ? 1 : 0;
  const std::uint32_t span = (n - 1) * (1u << log_stride) + 1;
  const std::uint32_t start = static_cast<std::uint32_t>(mix(seed) % (kPes - span + 1));
  return {start, log_stride, n};
}

template <class T>
T value(std::uint64_t seed, PeId pe, std::size_t i, std::uint64_t salt) {
  const std::uint64_t r = draw(seed, pe, i, salt);
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(static_cast<int>(r % 2001) - 1000);
  } else {
    return static_cast<T>(r);
  }
}

}  // namespace prop

inline PropertyResult run_property_case(const PropertyCase& pc) {
  using namespace prop;
  const std::uint32_t n = pc.pe_size;
  const std::size_t ne = pc.nelems;
  const std::uint64_t seed = pc.seed;
  const std::uint64_t block = ne * 8;
  const auto set = choose_set(n, seed);
  const std::uint32_t root = static_cast<std::uint32_t>(mix(seed ^ 0xB0) % n);
  auto count_of = [&](std::uint32_t rank) -> std::size_t { return (rank * 7 + seed) % (ne + 1); };
  const FeatureFlags flags{(seed & 2) != 0, (seed & 1) != 0};

  MeshOptions opts = randomized(seed);
  opts.layout.local_mem_size = 256 * 1024;
  opts.strict = true;
  Mesh m(kRows, kCols, {}, opts);

  struct Bufs {
    Offset src, put, get, put_nbi, get_nbi, unal, p, g, bcast, collect, fcollect, alltoall;
    Offset r64, r32, rf, r16, sum, xr, mx, mn, prod, pwrk, ps_a, ps_r, ps_t;
  } b{};
  const std::uint64_t unal_bytes = block == 0 ? 0 : block - 1;

  run_shmem(
      m,
      [&](Context& ctx) {
        const PeId me = ctx.my_pe();
        auto alloc = [&](std::uint64_t bytes, bool sentinel = true) {
          const auto a = ctx.malloc(static_cast<std::uint32_t>(std::max<std::uint64_t>(bytes, 8)));
          std::fill_n(ctx.local().begin() + a.offset, std::max<std::uint64_t>(bytes, 8),
                      sentinel ? kSentinel : std::byte{0});
          return a.offset;
        };
        Bufs l{};
        l.src = alloc(kPes * block);
        for (std::uint64_t i = 0; i < std::max<std::uint64_t>(kPes * block, 8); ++i) {
          ctx.local()[l.src + i] = std::byte(draw(seed, me, i, 1) & 0xFF);
        }
        l.put = alloc(block);
        l.get = alloc(block);
        l.put_nbi = alloc(block);
        l.get_nbi = alloc(block);
        l.unal = alloc(block + 8);
        l.p = alloc(8);
        l.g = alloc(8);
        l.bcast = alloc(block);
        l.collect = alloc(kPes * block);
        l.fcollect = alloc(kPes * block);
        l.alltoall = alloc(kPes * block);
        l.r64 = alloc(ne * 8);
        l.r32 = alloc(ne * 4);
        l.rf = alloc(ne * 8);
        l.r16 = alloc(ne * 2);
        for (std::size_t i = 0; i < ne; ++i) {
          ctx.store<std::int64_t>(l.r64 + 8 * i, prop::value<std::int64_t>(seed, me, i, 2));
          ctx.store<std::int32_t>(l.r32 + 4 * i, prop::value<std::int32_t>(seed, me, i, 3));
          ctx.store<double>(l.rf + 8 * i, prop::value<double>(seed, me, i, 4));
          ctx.store<std::int16_t>(l.r16 + 2 * i, prop::value<std::int16_t>(seed, me, i, 5));
        }
        l.sum = alloc(ne * 8);
        l.xr = alloc(ne * 8);
        l.mx = alloc(ne * 4);
        l.mn = alloc(ne * 8);
        l.prod = alloc(ne * 2);
        l.pwrk = alloc(8 * coll::reduce_work_elems(ne));
        l.ps_a = alloc(8 * coll::COLLECT_SYNC_SIZE, false);
        l.ps_r = alloc(8 * coll::REDUCE_SYNC_SIZE, false);
        l.ps_t = alloc(8 * coll::ALLTOALL_SYNC_SIZE, false);
        if (me == 0) b = l;
        ctx.barrier_all();

        if (set.contains(me)) {
          const std::uint32_t rank = set.rank_of(me);
          const PeId next = set.member((rank + 1) % n);
          ctx.put(l.put, l.src, ne, 8, next);
          ctx.get(l.get, l.src, ne, 8, next);
          ctx.put_nbi(l.put_nbi, l.src, ne, 8, next);
          ctx.get_nbi(l.get_nbi, l.src, ne, 8, next);
          ctx.quiet();
          ctx.putmem(l.unal + 3, l.src + 1, unal_bytes, next);
          ctx.p<std::int64_t>(l.p, 1000 + rank, next);
          ctx.store<std::int64_t>(l.g, ctx.g<std::int64_t>(l.src, next));

          coll::broadcast(ctx, l.bcast, l.src, ne, 8, root, set, l.ps_a);
          coll::collect(ctx, l.collect, l.src, count_of(rank), 8, set, l.ps_a);
          coll::fcollect(ctx, l.fcollect, l.src, ne, 8, set, l.ps_a);
          coll::reduce<std::int64_t>(ctx, coll::ReduceOp::sum, l.sum, l.r64, ne, set, l.pwrk, l.ps_r);
          coll::reduce<std::int64_t>(ctx, coll::ReduceOp::xor_, l.xr, l.r64, ne, set, l.pwrk, l.ps_r);
          coll::reduce<std::int32_t>(ctx, coll::ReduceOp::max, l.mx, l.r32, ne, set, l.pwrk, l.ps_r);
          coll::reduce<double>(ctx, coll::ReduceOp::min, l.mn, l.rf, ne, set, l.pwrk, l.ps_r);
          coll::reduce<std::int16_t>(ctx, coll::ReduceOp::prod, l.prod, l.r16, ne, set, l.pwrk, l.ps_r);
          coll::alltoall(ctx, l.alltoall, l.src, ne, 8, set, l.ps_t);
          ctx.quiet();
        }
        ctx.barrier_all();
      },
      flags);

  // ---- sequential model --------------------------------------------------
  PropertyResult res;
  auto src_byte = [&](PeId pe, std::uint64_t i) { return std::byte(draw(seed, pe, i, 1) & 0xFF); };
  auto check = [&](const char* what, PeId pe, Offset off, const std::vector<std::byte>& expect) {
    if (bytes_of(m, pe, off, expect.size()) != expect) {
      ++res.mismatches;
      res.failures.push_back(std::string(what) + " on pe " + std::to_string(pe));
    }
  };
  auto sentinel = [](std::uint64_t len) { return std::vector<std::byte>(len, kSentinel); };
  auto copy_src = [&](PeId pe, std::uint64_t from, std::uint64_t len) {
    std::vector<std::byte> v(len);
    for (std::uint64_t i = 0; i < len; ++i) v[i] = src_byte(pe, from + i);
    return v;
  };
  auto typed = [](auto v) {
    std::vector<std::byte> out(sizeof v);
    std::memcpy(out.data(), &v, sizeof v);
    return out;
  };
  auto append = [](std::vector<std::byte>& a, const std::vector<std::byte>& x) { a.insert(a.end(), x.begin(), x.end()); };

  for (PeId pe = 0; pe < kPes; ++pe) {
    if (!set.contains(pe)) {
      for (Offset o : {b.put, b.get, b.put_nbi, b.get_nbi, b.bcast}) check("untouched", pe, o, sentinel(block));
      check("untouched", pe, b.collect, sentinel(kPes * block));
      check("untouched", pe, b.fcollect, sentinel(kPes * block));
      check("untouched", pe, b.alltoall, sentinel(kPes * block));
      check("untouched", pe, b.sum, sentinel(ne * 8));
      check("untouched", pe, b.p, sentinel(8));
      continue;
    }
    const std::uint32_t rank = set.rank_of(pe);
    const PeId next = set.member((rank + 1) % n);
    const PeId prev = set.member((rank + n - 1) % n);

    check("put", pe, b.put, copy_src(prev, 0, block));
    check("get", pe, b.get, copy_src(next, 0, block));
    check("put_nbi", pe, b.put_nbi, copy_src(prev, 0, block));
    check("get_nbi", pe, b.get_nbi, copy_src(next, 0, block));
    {
      auto e = sentinel(block + 8);
      for (std::uint64_t i = 0; i < unal_bytes; ++i) e[3 + i] = src_byte(prev, 1 + i);
      check("putmem unaligned", pe, b.unal, e);
    }
    check("p", pe, b.p, typed(std::int64_t{1000 + set.rank_of(prev)}));
    {
      auto e = copy_src(next, 0, 8);
      check("g", pe, b.g, e);
    }
    check("broadcast", pe, b.bcast, rank == root ? sentinel(block) : copy_src(set.member(root), 0, block));
    {
      std::vector<std::byte> e;
      for (std::uint32_t k = 0; k < n; ++k) append(e, copy_src(set.member(k), 0, count_of(k) * 8));
      append(e, sentinel(kPes * block - e.size()));
      check("collect", pe, b.collect, e);
    }
    {
      std::vector<std::byte> e;
      for (std::uint32_t k = 0; k < n; ++k) append(e, copy_src(set.member(k), 0, block));
      append(e, sentinel(kPes * block - e.size()));
      check("fcollect", pe, b.fcollect, e);
    }
    {
      std::vector<std::byte> sum, xr, mx, mn, prod;
      for (std::size_t i = 0; i < ne; ++i) {
        std::uint64_t s = 0, x = 0;
        std::int32_t hi = INT32_MIN;
        double lo = INFINITY;
        std::uint16_t pr = 1;
        for (std::uint32_t k = 0; k < n; ++k) {
          const PeId q = set.member(k);
          s += static_cast<std::uint64_t>(prop::value<std::int64_t>(seed, q, i, 2));
          x ^= static_cast<std::uint64_t>(prop::value<std::int64_t>(seed, q, i, 2));
          hi = std::max(hi, prop::value<std::int32_t>(seed, q, i, 3));
          lo = std::min(lo, prop::value<double>(seed, q, i, 4));
          pr = static_cast<std::uint16_t>(pr * static_cast<std::uint16_t>(prop::value<std::int16_t>(seed, q, i, 5)));
        }
        append(sum, typed(s));
        append(xr, typed(x));
        append(mx, typed(hi));
        append(mn, typed(lo));
        append(prod, typed(pr));
      }
      check("reduce sum", pe, b.sum, sum);
      check("reduce xor", pe, b.xr, xr);
      check("reduce max", pe, b.mx, mx);
      check("reduce min", pe, b.mn, mn);
      check("reduce prod", pe, b.prod, prod);
    }
    {
      std::vector<std::byte> e;
      for (std::uint32_t j = 0; j < n; ++j) append(e, copy_src(set.member(j), rank * block, block));
      append(e, sentinel(kPes * block - e.size()));
      check("alltoall", pe, b.alltoall, e);
    }
  }
  return res;
}

}  // namespace eshmem::testing

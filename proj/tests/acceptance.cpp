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

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>

#include "eshmem/bench/fit.hpp"
#include "eshmem/bench/report.hpp"
#include "eshmem/bench/suite.hpp"
#include "property.hpp"

namespace {

using namespace eshmem;
using namespace eshmem::testing;
using bench::BenchConfig;
using bench::BenchSample;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("criterion %-3s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<BenchSample> suite(std::vector<std::string> routines, std::uint64_t lo, std::uint64_t hi,
                               FeatureFlags flags = {}, std::uint32_t reps = 100) {
  BenchConfig c;
  c.routines = std::move(routines);
  c.min_bytes = lo;
  c.max_bytes = hi;
  c.reps = reps;
  c.runtime.flags = flags;
  return bench::run_suite(c);
}

double beta_inv(const std::vector<BenchSample>& s) {
  std::vector<bench::FitPoint> pts;
  for (const auto& x : s) pts.push_back({double(x.size_bytes), x.seconds});
  return bench::fit_alpha_beta(pts).beta_inv;
}

double bandwidth_at(const std::vector<BenchSample>& s, std::uint64_t l) {
  for (const auto& x : s) {
    if (x.size_bytes == l) return x.bandwidth();
  }
  return 0;
}

double latency_at(const std::vector<BenchSample>& s, std::uint32_t pes) {
  for (const auto& x : s) {
    if (x.pe_count == pes) return x.seconds;
  }
  return 0;
}

bool near(double v, double target, double tol) { return std::abs(v - target) <= tol * target; }

void criterion_put_bandwidth() {
  const double bi = beta_inv(suite({"put"}, 256, 8192));
  report("1", near(bi, 2.4e9, 0.05), fmt("put beta^-1 = %.4g B/s (target 2.4e9 +-5%%)", bi));
}

void criterion_get_asymmetry() {
  const double put = bandwidth_at(suite({"put"}, 8192, 8192), 8192);
  const double get = bandwidth_at(suite({"get"}, 8192, 8192), 8192);
  const double ratio = put / get;
  report("2", ratio >= 5 && ratio <= 15, fmt("put/get throughput at 8192 B = %.2fx (band 5-15x)", ratio));
}

void criterion_ipi_get() {
  const double direct = bandwidth_at(suite({"get"}, 8192, 8192), 8192);
  const double ipi = bandwidth_at(suite({"get"}, 8192, 8192, {false, true}), 8192);
  // Trace which path each size took.
  bool paths_ok = true;
  for (std::uint32_t n : {8u, 16u, 32u, 64u, 72u, 128u, 8192u}) {
    mesh::MeshOptions o;
    o.trace = true;
    Mesh m(4, 4, {}, o);
    run_shmem(
        m,
        [&](Context& ctx) {
          const auto src = ctx.malloc(8192);
          const auto dst = ctx.malloc(8192);
          ctx.barrier_all();
          if (ctx.my_pe() == 0) {
            ctx.core().mesh().clear_trace();
            ctx.getmem(dst.offset, src.offset, n, 1);
          }
          ctx.barrier_all();
        },
        {false, true});
    bool irq = false, direct_read = false;
    for (const auto& r : m.trace()) {
      if (r.issuer != 0 || r.target != 1) continue;
      irq |= r.kind == mesh::TraceKind::interrupt;
      direct_read |= r.kind == mesh::TraceKind::copy_in;
    }
    paths_ok &= (n <= 64) ? (direct_read && !irq) : (irq && !direct_read);
  }
  const double gain = ipi / direct;
  report("3", gain >= 2 && paths_ok,
         fmt("ipi/direct get throughput at 8192 B = %.2fx (>= 2x); <=64 B direct path: ", gain) +
             (paths_ok ? "yes" : "no"));
}

void criterion_barriers() {
  const double wand = latency_at(suite({"barrier"}, 8, 8, {true, false}), 16);
  const double dis = latency_at(suite({"barrier"}, 8, 8), 16);
  const double ctr = latency_at(suite({"barrier_counter"}, 8, 8), 16);
  const bool ok = near(wand, 0.1e-6, 0.2) && near(dis, 0.23e-6, 0.2) && near(ctr, 2.0e-6, 0.2) && wand < dis &&
                  dis < ctr;
  report("4", ok,
         fmt("16 PEs: wand %.3f us, dissemination %.3f us, counter %.3f us (0.1/0.23/2.0 +-20%%)", wand * 1e6,
             dis * 1e6, ctr * 1e6));
}

void criterion_psync_bytes() {
  bool ok = true;
  std::string detail;
  for (std::uint32_t n : {2u, 4u, 8u, 16u}) {
    const auto shape = *bench::mesh_shape(n, 4, 4);
    Mesh m(shape.first, shape.second);
    Offset ps = 0;
    run_shmem(m, [&](Context& ctx) {
      const auto a = ctx.malloc(8 * coll::BARRIER_SYNC_SIZE);
      std::fill_n(ctx.local().begin() + a.offset, 8 * coll::BARRIER_SYNC_SIZE, std::byte{0});
      ps = a.offset;
      ctx.barrier_all();
      coll::barrier(ctx, coll::ActiveSet::all(n), a.offset);
      coll::barrier(ctx, coll::ActiveSet::all(n), a.offset);
    });
    std::uint32_t used = 0;
    for (PeId pe = 0; pe < n; ++pe) {
      for (std::uint32_t w = 0; w < coll::BARRIER_SYNC_SIZE; ++w) {
        if (peek<std::uint64_t>(m, pe, ps + 8 * w) != 0) used = std::max(used, (w + 1) * 8);
      }
    }
    const std::uint32_t expect = 8 * coll::ceil_log2(n);
    ok &= used == expect;
    detail += std::to_string(n) + "->" + std::to_string(used) + "B ";
  }
  report("5", ok, "pSync bytes touched per N: " + detail + "(8*ceil(log2 N))");
}

void criterion_broadcast() {
  const double bi = beta_inv(suite({"broadcast"}, 8, 8192));
  report("6", near(bi, 0.6e9, 0.10), fmt("16-PE broadcast beta^-1 = %.4g B/s (target 0.6e9 +-10%%)", bi));
}

void criterion_dma_throttle() {
  const double bi = beta_inv(suite({"put_nbi"}, 8, 8192));
  report("7", bi <= 2.4e9, fmt("put_nbi beta^-1 = %.4g B/s (<= 2.4e9)", bi));
}

void criterion_property_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cases = 0, mismatches = 0;
  std::string first;
  for (std::uint32_t n = 1; n <= 16; ++n) {
    for (std::size_t ne : {0u, 1u, 3u, 8u, 64u, 257u}) {
      for (std::uint64_t s = 0; s < 100; ++s) {
        PropertyResult r;
        try {
          r = run_property_case({n, ne, prop::mix(s * 131 + n * 17 + ne)});
        } catch (const std::exception& e) {
          r.mismatches = 1;
          r.failures.push_back(std::string("exception: ") + e.what());
        }
        ++cases;
        mismatches += r.mismatches;
        if (first.empty() && !r.failures.empty()) {
          first = " first: n=" + std::to_string(n) + " nelems=" + std::to_string(ne) + " " + r.failures.front();
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report("8", mismatches == 0 && secs < 300,
         std::to_string(cases) + " schedules, " + std::to_string(mismatches) + " mismatches, " +
             fmt("%.1f s (< 300 s)", secs) + first);
}

// Independent model of the bump allocator used to judge the real one.
struct HeapModel {
  std::uint64_t base, limit, brk;
  std::vector<shmem::SymAlloc> live;
  static std::uint64_t up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }
};

void criterion_allocator() {
  std::mt19937_64 rng(2024);
  std::size_t bad = 0, faults_checked = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    mesh::LocalStore store{mesh::MemoryLayout{}};
    shmem::SymmetricHeap heap(store);
    HeapModel model{store.heap_base, store.stack_limit, store.heap_brk, {}};
    auto expect_fault = [&](auto&& op) {
      ++faults_checked;
      try {
        op();
        ++bad;
      } catch (const mesh::Fault&) {
      }
    };
    for (int step = 0; step < 60; ++step) {
      const int kind = static_cast<int>(rng() % 6);
      if (kind <= 1 || model.live.empty()) {
        const std::uint32_t size = static_cast<std::uint32_t>(rng() % 3000);
        const std::uint32_t align = 8u << (rng() % 5);
        const std::uint64_t off = HeapModel::up(model.brk, align);
        const std::uint64_t end = off + HeapModel::up(size, 8);
        if (end > model.limit) {
          expect_fault([&] { heap.allocate(size, align); });
        } else {
          const auto a = heap.allocate(size, align);
          if (a.offset != off) ++bad;
          model.brk = end;
          model.live.push_back(a);
        }
      } else if (kind == 2) {
        const std::size_t i = rng() % model.live.size();
        const auto a = model.live[i];
        heap.free(a);
        model.brk = a.offset;
        model.live.resize(i);
        expect_fault([&] { heap.free(a); });
      } else if (kind == 3) {
        const auto a = model.live.back();
        const std::uint32_t size = static_cast<std::uint32_t>(rng() % 3000);
        const std::uint64_t end = a.offset + HeapModel::up(size, 8);
        if (end > model.limit) {
          expect_fault([&] { heap.reallocate(a, size); });
        } else {
          const auto r = heap.reallocate(a, size);
          if (r.offset != a.offset) ++bad;
          model.brk = end;
          model.live.back() = r;
        }
      } else if (kind == 4 && model.live.size() >= 2) {
        const auto a = model.live[rng() % (model.live.size() - 1)];
        expect_fault([&] { heap.reallocate(a, 16); });
      } else {
        const std::uint32_t align = static_cast<std::uint32_t>(rng() % 8 == 0 ? 4 : 8 + 1 + rng() % 60);
        if (align < 8 || !std::has_single_bit(align)) expect_fault([&] { heap.allocate(8, align); });
      }
      // Region invariants and agreement with the model.
      if (heap.brk() != model.brk || !store.regions_valid() || heap.live().size() != model.live.size()) ++bad;
      std::uint64_t prev_end = model.base;
      for (const auto& a : heap.live()) {
        if (a.offset % a.alignment != 0 || a.offset < prev_end) ++bad;
        prev_end = a.offset + HeapModel::up(a.size, 8);
      }
      if (prev_end > heap.brk()) ++bad;
    }
    // Freeing in reverse order walks brk back to the heap base.
    while (!model.live.empty()) {
      heap.free(model.live.back());
      model.live.pop_back();
    }
    if (heap.brk() != model.base) ++bad;
  }
  report("9", bad == 0,
         "1000 random alloc/free/realloc sequences, " + std::to_string(bad) + " violations, " +
             std::to_string(faults_checked) + " rule faults checked");
}

void criterion_atomics() {
  bool counts_ok = true, disjoint = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Mesh m(4, 4, {}, randomized(seed * 977 + 1, 5));
    std::int64_t final = -1;
    std::vector<std::pair<Cycle, Cycle>> sections;
    run_shmem(m, [&](Context& ctx) {
      const auto counter = ctx.malloc(8);
      const auto lock = ctx.malloc(8);
      ctx.store<std::int64_t>(counter.offset, 0);
      ctx.store<std::uint64_t>(lock.offset, 0);
      ctx.barrier_all();
      if (ctx.my_pe() != 0) {
        for (int i = 0; i < 100; ++i) (void)ctx.atomic_fetch_add<std::int64_t>(counter.offset, 1, 0);
      }
      ctx.barrier_all();
      if (ctx.my_pe() == 0) final = ctx.load<std::int64_t>(counter.offset);
      for (int i = 0; i < 3; ++i) {
        coll::set_lock(ctx, lock.offset);
        const Cycle in = ctx.core().now();
        ctx.core().advance(10);
        sections.emplace_back(in, ctx.core().now());
        coll::clear_lock(ctx, lock.offset);
      }
    });
    counts_ok &= final == 1500;
    std::sort(sections.begin(), sections.end());
    for (std::size_t i = 1; i < sections.size(); ++i) disjoint &= sections[i].first >= sections[i - 1].second;
  }
  report("10", counts_ok && disjoint,
         std::string("15 PEs x 100 fetch_add over 20 schedules: ") + (counts_ok ? "1500 each" : "mismatch") +
             "; lock sections disjoint: " + (disjoint ? "yes" : "no"));
}

void criterion_determinism() {
  auto once = [] {
    BenchConfig c;
    c.routines = bench::all_routines();
    c.seed = 42;
    const auto s = bench::run_suite(c);
    return bench::emit_csv(s, bench::fit_samples(s));
  };
  const auto a = once();
  const auto b = once();
  report("11", a == b && a.size() > 100, "full suite CSV, seed 42: " + std::to_string(a.size()) + " bytes, " +
                                              (a == b ? "identical" : "different"));
}

void shape_checks() {
  const auto all = suite({"put", "get", "put_nbi", "broadcast", "fcollect", "reduce", "alltoall"}, 8, 8192);
  std::map<std::string, std::vector<BenchSample>> by;
  for (const auto& s : all) by[s.routine].push_back(s);
  bool mono = true;
  for (auto& [r, v] : by) {
    for (std::size_t i = 1; i < v.size(); ++i) mono &= v[i].seconds >= v[i - 1].seconds;
  }
  report("S1", mono, "elapsed time non-decreasing in L for every sized routine");

  const auto bar = suite({"barrier"}, 8, 8);
  std::vector<double> t;
  for (const auto& s : bar) t.push_back(s.seconds);
  // Equal steps per doubling: each increment within 2x of the first.
  bool log_growth = t.size() == 4;
  for (std::size_t i = 1; log_growth && i < t.size(); ++i) {
    const double inc = t[i] - t[i - 1], first = t[1] - t[0];
    log_growth &= inc > 0 && inc < 2 * first && inc > 0.5 * first;
  }
  report("S2", log_growth,
         fmt("barrier latency 2/4/8/16 PEs = %.3f/%.3f/%.3f/%.3f us", t[0] * 1e6, t[1] * 1e6, t[2] * 1e6,
             t[3] * 1e6));

  bool a2a = true;
  for (const auto& s : by["alltoall"]) {
    for (const auto& b : by["broadcast"]) {
      if (b.size_bytes == s.size_bytes) a2a &= s.seconds > b.seconds;
    }
  }
  report("S3", a2a && !by["alltoall"].empty(), "alltoall latency above broadcast at every common size");
}

}  // namespace

int main() {
  criterion_put_bandwidth();
  criterion_get_asymmetry();
  criterion_ipi_get();
  criterion_barriers();
  criterion_psync_bytes();
  criterion_broadcast();
  criterion_dma_throttle();
  criterion_property_suite();
  criterion_allocator();
  criterion_atomics();
  criterion_determinism();
  shape_checks();
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}

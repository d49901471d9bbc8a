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
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eshmem/bench/fit.hpp"
#include "eshmem/bench/suite.hpp"

namespace eshmem::bench {

enum class ReportFormat { csv, table };

struct FitRecord {
  std::string routine;
  std::uint32_t pe_count = 0;
  AlphaBetaFit fit;
};

/// One fit per (routine, pe_count) group that spans at least two sizes.
inline std::vector<FitRecord> fit_samples(const std::vector<BenchSample>& samples) {
  std::vector<std::pair<std::string, std::uint32_t>> order;
  std::map<std::pair<std::string, std::uint32_t>, std::vector<FitPoint>> groups;
  for (const auto& s : samples) {
    auto key = std::pair{s.routine, s.pe_count};
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back({static_cast<double>(s.size_bytes), s.seconds});
  }
  std::vector<FitRecord> out;
  for (const auto& key : order) {
    const auto& pts = groups[key];
    std::set<double> distinct;
    for (const auto& p : pts) distinct.insert(p.bytes);
    if (distinct.size() < 2) continue;
    out.push_back({key.first, key.second, fit_alpha_beta(pts)});
  }
  return out;
}

namespace detail {

template <class... Args>
void appendf(std::string& out, const char* fmt, Args... args) {
  char buf[512];
  const int n = std::snprintf(buf, sizeof buf, fmt, args...);
  out.append(buf, static_cast<std::size_t>(std::max(n, 0)));
}

}  // namespace detail

inline std::string emit_csv(const std::vector<BenchSample>& samples, const std::vector<FitRecord>& fits) {
  std::string out = "routine,pe_count,size_bytes,reps,seconds,bandwidth_bytes_per_s\n";
  for (const auto& s : samples) {
    detail::appendf(out, "%s,%u,%llu,%u,%.9e,%.6e\n", s.routine.c_str(), s.pe_count,
                    static_cast<unsigned long long>(s.size_bytes), s.reps, s.seconds, s.bandwidth());
  }
  for (const auto& f : fits) {
    detail::appendf(out,
                    "# fit routine=%s pe_count=%u n=%zu alpha_s=%.6e alpha_sd=%.3e "
                    "beta_inv_bytes_per_s=%.6e beta_inv_sd=%.3e residual_s=%.3e%s\n",
                    f.routine.c_str(), f.pe_count, f.fit.n, f.fit.alpha, f.fit.alpha_sd,
                    f.fit.beta_inv, f.fit.beta_inv_sd, f.fit.residual_norm,
                    f.fit.sd_defined ? "" : " sd=undefined");
  }
  return out;
}

inline std::string emit_table(const std::vector<BenchSample>& samples, const std::vector<FitRecord>& fits) {
  std::vector<std::string> routines;
  for (const auto& s : samples) {
    if (std::find(routines.begin(), routines.end(), s.routine) == routines.end()) routines.push_back(s.routine);
  }
  std::string out;
  for (const auto& r : routines) {
    detail::appendf(out, "%s\n", r.c_str());
    for (const auto& f : fits) {
      if (f.routine != r) continue;
      detail::appendf(out, "  %u PEs: α = %.4f ± %.4f us, β⁻¹ = %.4f ± %.4f GB/s\n",
                      f.pe_count, f.fit.alpha * 1e6, f.fit.alpha_sd * 1e6, f.fit.beta_inv / 1e9,
                      f.fit.beta_inv_sd / 1e9);
    }
    std::vector<const BenchSample*> rows;
    for (const auto& s : samples) {
      if (s.routine == r) rows.push_back(&s);
    }
    std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
      return a->pe_count != b->pe_count ? a->pe_count < b->pe_count : a->size_bytes < b->size_bytes;
    });
    detail::appendf(out, "  %8s %10s %6s %14s %14s\n", "pe_count", "size_bytes", "reps", "latency_us",
                    "bandwidth_GB/s");
    for (const auto* s : rows) {
      detail::appendf(out, "  %8u %10llu %6u %14.4f %14.4f\n", s->pe_count,
                      static_cast<unsigned long long>(s->size_bytes), s->reps, s->seconds * 1e6,
                      s->bandwidth() / 1e9);
    }
  }
  return out;
}

inline std::string emit_report(const std::vector<BenchSample>& samples, const std::vector<FitRecord>& fits,
                               ReportFormat format) {
  return format == ReportFormat::csv ? emit_csv(samples, fits) : emit_table(samples, fits);
}

}  // namespace eshmem::bench

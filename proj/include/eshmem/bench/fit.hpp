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

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace eshmem::bench {

/// Least-squares fit of T = alpha + beta * L.
struct AlphaBetaFit {
  double alpha = 0;     // seconds
  double beta = 0;      // seconds per byte
  double beta_inv = 0;  // bytes per second
  double alpha_sd = 0;
  double beta_sd = 0;
  double beta_inv_sd = 0;
  double residual_norm = 0;
  std::size_t n = 0;
  // False for an exact two-point fit, where the sds are NaN.
  bool sd_defined = false;
};

struct FitPoint {
  double bytes;
  double seconds;
};

class FitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline AlphaBetaFit fit_alpha_beta(std::span<const FitPoint> pts) {
  if (pts.size() < 2) throw FitError("fit needs at least two samples");
  const double n = static_cast<double>(pts.size());
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.bytes;
    my += p.seconds;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    sxx += (p.bytes - mx) * (p.bytes - mx);
    sxy += (p.bytes - mx) * (p.seconds - my);
  }
  if (sxx == 0) throw FitError("degenerate fit: all sizes equal");

  AlphaBetaFit f;
  f.n = pts.size();
  f.beta = sxy / sxx;
  f.alpha = my - f.beta * mx;
  f.beta_inv = f.beta != 0 ? 1.0 / f.beta : std::numeric_limits<double>::infinity();
  double ss = 0;
  for (const auto& p : pts) {
    const double r = p.seconds - (f.alpha + f.beta * p.bytes);
    ss += r * r;
  }
  f.residual_norm = std::sqrt(ss);
  if (pts.size() > 2) {
    const double s2 = ss / (n - 2);
    f.beta_sd = std::sqrt(s2 / sxx);
    f.alpha_sd = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    f.beta_inv_sd = f.beta_sd / (f.beta * f.beta);
    f.sd_defined = true;
  } else {
    f.alpha_sd = f.beta_sd = f.beta_inv_sd = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

}  // namespace eshmem::bench

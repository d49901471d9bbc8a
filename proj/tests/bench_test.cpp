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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eshmem/bench/fit.hpp"
#include "eshmem/bench/report.hpp"
#include "eshmem/bench/suite.hpp"

namespace {

using namespace eshmem::bench;

TEST(Fit, RecoversGeneratingLine) {
  std::vector<FitPoint> pts;
  for (double l = 8; l <= 8192; l *= 2) pts.push_back({l, 1e-6 + l / 2.4e9});
  const auto f = fit_alpha_beta(pts);
  EXPECT_NEAR(f.alpha, 1e-6, 1e-15);
  EXPECT_NEAR(f.beta_inv, 2.4e9, 1e-3 * 2.4e9 * 1e-6);
  EXPECT_NEAR(f.residual_norm, 0.0, 1e-18);
  EXPECT_TRUE(f.sd_defined);
  EXPECT_NEAR(f.beta_sd, 0.0, 1e-20);
}

TEST(Fit, KnownNoisyFit) {
  // y = 1 + 2x with residuals (+1, -1, -1, +1) at x = 0..3; by hand:
  // beta = 2, alpha = 1, s^2 = 4/2, Sxx = 5.
  const std::vector<FitPoint> pts{{0, 2}, {1, 2}, {2, 4}, {3, 8}};
  const auto f = fit_alpha_beta(pts);
  EXPECT_DOUBLE_EQ(f.beta, 2.0);
  EXPECT_DOUBLE_EQ(f.alpha, 1.0);
  EXPECT_NEAR(f.residual_norm, 2.0, 1e-12);
  EXPECT_NEAR(f.beta_sd, std::sqrt(2.0 / 5.0), 1e-12);
  EXPECT_NEAR(f.alpha_sd, std::sqrt(2.0 * (0.25 + 2.25 / 5.0)), 1e-12);
  EXPECT_NEAR(f.beta_inv_sd, std::sqrt(2.0 / 5.0) / 4.0, 1e-12);
}

TEST(Fit, TwoPointsAndDegenerate) {
  const std::vector<FitPoint> two{{8, 1e-6}, {16, 2e-6}};
  const auto f = fit_alpha_beta(two);
  EXPECT_NEAR(f.alpha, 0.0, 1e-18);
  EXPECT_DOUBLE_EQ(f.residual_norm, 0.0);
  EXPECT_FALSE(f.sd_defined);
  EXPECT_TRUE(std::isnan(f.beta_sd));
  const std::vector<FitPoint> same{{8, 1e-6}, {8, 2e-6}, {8, 3e-6}};
  EXPECT_THROW(fit_alpha_beta(same), FitError);
  EXPECT_THROW(fit_alpha_beta(std::vector<FitPoint>{{8, 1}}), FitError);
}

TEST(Report, CsvBandwidthColumn) {
  BenchSample s{"put", 16, 8192, 100, 2046, 3.41e-6};
  const auto csv = emit_report({s}, {}, ReportFormat::csv);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "routine,pe_count,size_bytes,reps,seconds,bandwidth_bytes_per_s");
  const double bw = std::stod(row.substr(row.rfind(',') + 1));
  EXPECT_NEAR(bw, 2.40e9, 0.01e9);
  EXPECT_EQ(row.substr(0, 18), "put,16,8192,100,3.");
}

TEST(Report, EmptyInputIsHeaderOnly) {
  EXPECT_EQ(emit_report({}, {}, ReportFormat::csv), "routine,pe_count,size_bytes,reps,seconds,bandwidth_bytes_per_s\n");
}

TEST(Report, TableRowsOrderedByPeCount) {
  std::vector<BenchSample> s{{"barrier", 16, 0, 1, 1, 4e-7}, {"barrier", 2, 0, 1, 1, 1e-7}, {"barrier", 8, 0, 1, 1, 3e-7}};
  const auto t = emit_report(s, {}, ReportFormat::table);
  const auto p2 = t.find("\n         2 "), p8 = t.find("\n         8 "), p16 = t.find("\n        16 ");
  ASSERT_NE(p2, std::string::npos);
  EXPECT_LT(p2, p8);
  EXPECT_LT(p8, p16);
}

TEST(Suite, Validation) {
  BenchConfig c;
  c.routines = {"nope"};
  EXPECT_THROW(run_suite(c), SuiteError);
  c.routines = {"put"};
  c.min_bytes = 100;
  c.max_bytes = 10;
  EXPECT_THROW(run_suite(c), SuiteError);
  c.min_bytes = 9;
  c.max_bytes = 15;
  EXPECT_THROW(run_suite(c), SuiteError);
  c = {};
  c.pes = 17;
  EXPECT_THROW(run_suite(c), SuiteError);
  c = {};
  EXPECT_TRUE(run_suite(c).empty());
}

TEST(Suite, PutSweepIsMonotone) {
  BenchConfig c;
  c.routines = {"put"};
  c.reps = 10;
  const auto s = run_suite(c);
  ASSERT_EQ(s.size(), 11u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(s[i].seconds, s[i - 1].seconds);
  std::vector<FitPoint> pts;
  for (const auto& x : s) pts.push_back({double(x.size_bytes), x.seconds});
  const auto f = fit_alpha_beta(pts);
  // Residual at most one cycle per sample.
  EXPECT_LE(f.residual_norm, std::sqrt(double(s.size())) / 600e6);
  for (const auto& x : s) EXPECT_LE(x.bandwidth(), 2.4e9 * (1 + 1e-9));
}

TEST(Suite, BarrierGrowsWithPes) {
  BenchConfig c;
  c.routines = {"barrier"};
  c.reps = 20;
  const auto s = run_suite(c);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(s[i].seconds, s[i - 1].seconds);
}

TEST(Suite, MeshShapes) {
  EXPECT_EQ(mesh_shape(16, 4, 4), std::make_optional(std::pair{4u, 4u}));
  EXPECT_EQ(mesh_shape(8, 4, 4), std::make_optional(std::pair{2u, 4u}));
  EXPECT_EQ(mesh_shape(2, 4, 4), std::make_optional(std::pair{1u, 2u}));
  EXPECT_FALSE(mesh_shape(5, 4, 4).has_value());
}

#ifdef ESHMEM_BENCH_EXE
int run_cli(const std::string& args) {
  const int rc = std::system((std::string(ESHMEM_BENCH_EXE) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodes) {
  const std::string cfg = ::testing::TempDir() + "bench_cli_bad.cfg";
  {
    std::ofstream f(cfg);
    f << "warp_factor = 9\n";
  }
  EXPECT_EQ(run_cli("run --suite put --sizes 8:64 --reps 2"), 0);
  EXPECT_EQ(run_cli("run --suite bogus"), 2);
  EXPECT_EQ(run_cli("run --suite put --config " + cfg), 2);
  EXPECT_EQ(run_cli("run --suite put --sizes 64:8"), 2);
  EXPECT_EQ(run_cli("run --suite put --format xml"), 2);
  EXPECT_EQ(run_cli("run --suite \"\""), 0);
}
#endif

}  // namespace

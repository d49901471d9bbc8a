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

// bench: microbenchmark driver for the simulated mesh.
//
//   bench run --suite put,get --pes 16 --sizes 8:8192 --format table

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "eshmem/bench/report.hpp"
#include "eshmem/bench/suite.hpp"
#include "eshmem/config.hpp"

namespace {

constexpr int kConfigError = 2;

void parse_sizes(const std::string& text, eshmem::bench::BenchConfig& cfg) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw eshmem::bench::SuiteError("--sizes expects MIN:MAX");
  try {
    std::size_t used = 0;
    const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
    cfg.min_bytes = std::stoull(lo, &used);
    if (used != lo.size()) throw std::invalid_argument(lo);
    cfg.max_bytes = std::stoull(hi, &used);
    if (used != hi.size()) throw std::invalid_argument(hi);
  } catch (const std::logic_error&) {
    throw eshmem::bench::SuiteError("bad --sizes value '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency/bandwidth microbenchmarks on the simulated mesh"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run a benchmark suite");

  eshmem::bench::BenchConfig cfg;
  std::vector<std::string> suite = eshmem::bench::all_routines();
  std::string sizes = "8:8192";
  std::string config_path;
  std::string format = "csv";
  std::string out_path;
  bool wand = false, ipi = false;

  run->add_option("--suite", suite, "comma-separated routines")->delimiter(',');
  run->add_option("--pes", cfg.pes, "number of PEs");
  run->add_option("--rows", cfg.rows, "mesh rows");
  run->add_option("--cols", cfg.cols, "mesh columns");
  run->add_option("--sizes", sizes, "message size range MIN:MAX in bytes");
  run->add_option("--reps", cfg.reps, "timed iterations per point");
  run->add_option("--seed", cfg.seed, "scheduler seed");
  run->add_option("--config", config_path, "key = value cost model file");
  run->add_flag("--wand-barrier", wand, "use the wired-AND barrier for barrier_all");
  run->add_flag("--ipi-get", ipi, "serve large gets by interrupting the owner");
  run->add_option("--format", format, "csv or table")->check(CLI::IsMember({"csv", "table"}));
  run->add_option("--out", out_path, "write report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  std::vector<eshmem::bench::BenchSample> samples;
  try {
    if (!config_path.empty()) cfg.runtime = eshmem::load_config(config_path);
    if (wand) cfg.runtime.flags.use_wand_barrier = true;
    if (ipi) cfg.runtime.flags.use_ipi_get = true;
    parse_sizes(sizes, cfg);
    std::erase(suite, std::string{});
    cfg.routines = suite;
    samples = eshmem::bench::run_suite(cfg);
  } catch (const eshmem::ConfigError& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return kConfigError;
  } catch (const eshmem::bench::SuiteError& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return kConfigError;
  } catch (const eshmem::mesh::Fault& e) {
    std::cerr << "bench: simulation fault: " << e.what() << "\n";
    return e.kind() == eshmem::mesh::FaultKind::config ? kConfigError : 1;
  }

  const auto fits = eshmem::bench::fit_samples(samples);
  const auto text = eshmem::bench::emit_report(
      samples, fits, format == "csv" ? eshmem::bench::ReportFormat::csv : eshmem::bench::ReportFormat::table);
  if (out_path.empty()) {
    std::cout << text;
    return std::cout ? 0 : 1;
  }
  std::ofstream f(out_path, std::ios::binary);
  f << text;
  if (!f) {
    std::cerr << "bench: cannot write " << out_path << "\n";
    return 1;
  }
  return 0;
}

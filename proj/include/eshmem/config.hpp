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

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "eshmem/mesh/cost_model.hpp"

namespace eshmem {

/// Runtime switches that mirror the SHMEM_USE_WAND_BARRIER and
/// SHMEM_USE_IPI_GET build options.
struct FeatureFlags {
  bool use_wand_barrier = false;
  bool use_ipi_get = false;
};

struct RuntimeConfig {
  mesh::CostModel cost;
  FeatureFlags flags;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(std::string_view text, std::string_view key, int line) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("line " + std::to_string(line) + ": value for '" + std::string(key) +
                      "' is not a number");
  }
  return v;
}

inline bool parse_flag(std::string_view text, std::string_view key, int line) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw ConfigError("line " + std::to_string(line) + ": value for '" + std::string(key) +
                    "' must be 0, 1, true or false");
}

}  // namespace detail

/// Parse the flat `key = value` calibration format. Keys are the CostModel
/// field names plus the two feature flags; `#` starts a comment.
inline RuntimeConfig parse_config(std::string_view text, RuntimeConfig base = {}) {
  RuntimeConfig cfg = base;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (!seen.emplace(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" +
                        std::string(key) + "'");
    }
    if (key == "use_wand_barrier") {
      cfg.flags.use_wand_barrier = detail::parse_flag(value, key, line_no);
      continue;
    }
    if (key == "use_ipi_get") {
      cfg.flags.use_ipi_get = detail::parse_flag(value, key, line_no);
      continue;
    }
    bool known = false;
    for (const auto& f : mesh::kCostFields) {
      if (f.name == key) {
        cfg.cost.*(f.member) = detail::parse_number(value, key, line_no);
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    }
  }
  try {
    cfg.cost.validate();
  } catch (const mesh::Fault& f) {
    throw ConfigError(f.what());
  }
  return cfg;
}

inline RuntimeConfig load_config(const std::filesystem::path& path, RuntimeConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

/// Serialize in the same format parse_config reads.
inline std::string to_config_text(const RuntimeConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& f : mesh::kCostFields) os << f.name << " = " << cfg.cost.*(f.member) << '\n';
  os << "use_wand_barrier = " << (cfg.flags.use_wand_barrier ? 1 : 0) << '\n';
  os << "use_ipi_get = " << (cfg.flags.use_ipi_get ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace eshmem

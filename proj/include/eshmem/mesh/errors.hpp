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

#include <stdexcept>
#include <string>

namespace eshmem::mesh {

enum class FaultKind {
  alignment,
  bus,
  range,
  config,
  interrupt,
  stall,
  source_reuse,
  usage,
};

inline const char* to_string(FaultKind k) {
  switch (k) {
    case FaultKind::alignment: return "alignment fault";
    case FaultKind::bus: return "bus fault";
    case FaultKind::range: return "range fault";
    case FaultKind::config: return "configuration error";
    case FaultKind::interrupt: return "interrupt fault";
    case FaultKind::stall: return "stall";
    case FaultKind::source_reuse: return "source buffer reused before quiet";
    case FaultKind::usage: return "usage fault";
  }
  return "fault";
}

// Every simulated hardware or runtime error surfaces as a Fault.
class Fault : public std::runtime_error {
 public:
  Fault(FaultKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FaultKind kind() const noexcept { return kind_; }

 private:
  FaultKind kind_;
};

}  // namespace eshmem::mesh

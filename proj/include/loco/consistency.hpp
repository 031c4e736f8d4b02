// Copyright 2026 The loco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>

#include "loco/common.hpp"
#include "loco/completion.hpp"

namespace loco {

struct FenceScope {
  enum class Kind : std::uint8_t { kNone, kPair, kThread, kGlobal };
  Kind kind = Kind::kGlobal;
  NodeId peer = 0;

  static FenceScope pair(NodeId peer) { return {Kind::kPair, peer}; }
  static FenceScope thread() { return {Kind::kThread, 0}; }
  static FenceScope global() { return {Kind::kGlobal, 0}; }
  static FenceScope none() { return {Kind::kNone, 0}; }

  std::string describe() const;
};

// Writes one thread posted to one peer since the last fence covering them.
struct LedgerEntry {
  AckKey unfenced;
  std::uint64_t writes = 0;

  bool dirty() const { return writes != 0; }
  void clear() {
    unfenced = AckKey();
    writes = 0;
  }
};

struct FenceStats {
  std::uint64_t fences = 0;
  std::uint64_t flush_reads = 0;
  std::uint64_t skipped = 0;  // fences with nothing to cover
};

}  // namespace loco

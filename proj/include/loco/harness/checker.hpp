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
#include <vector>

#include "loco/harness/history.hpp"

namespace loco::harness {

struct CheckOptions {
  // Largest partition searched exhaustively; at most 64.
  std::size_t max_ops = 60;
  // Visited states allowed per partition before giving up as too large.
  std::uint64_t max_states = 2'000'000;
};

struct Verdict {
  enum class Kind { kOk, kCounterexample, kTooLarge };
  Kind kind = Kind::kOk;
  std::string message;
  // The operations of the first partition with no legal witness.
  std::vector<HistoryRecord> counterexample;
  std::uint64_t states_explored = 0;

  bool ok() const { return kind == Kind::kOk; }
};

// Map semantics: insert is Ok on an absent key and AlreadyExists otherwise
// (CapacityExhausted only on an absent key, with no effect); remove and
// update are NotFound on an absent key; read returns the mapped value or
// nothing. Keys are independent objects and are checked one at a time.
Verdict check_map_linearizable(const std::vector<HistoryRecord>& history,
                               CheckOptions options = {});

// FIFO queue semantics over push/pop; a Full push has no effect.
Verdict check_queue_linearizable(const std::vector<HistoryRecord>& history,
                                 CheckOptions options = {});

}  // namespace loco::harness

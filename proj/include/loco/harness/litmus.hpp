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

#include "loco/fabric.hpp"

namespace loco::harness {

// Message passing across queue pairs on four simulated nodes. Writer threads
// on node 0 store data into nodes 1 and 3, one fence variant runs, and a
// different writer thread (so a different queue pair) sets a flag on node 1.
// Node 2 spins reading the flag remotely and then reads the data remotely.
enum class FenceVariant {
  kNone,           // data@1; flag@1
  kPair,           // data@1; fence(pair 1); flag@1
  kPairWrongPeer,  // data@1; fence(pair 3); flag@1
  kThread,         // data@1 and data@3 by one thread; fence(thread); flag@1
  kGlobal,         // data@1 and data@3 by two threads; fence(global); flag@1
};

const char* to_string(FenceVariant v);

struct LitmusOutcome {
  bool stale = false;
  TimeNs end_time = 0;
};

// data_bytes of data per target, written as one verb.
LitmusOutcome message_passing(FenceVariant variant, std::uint64_t seed,
                              PlacementModel model = PlacementModel::adversarial(8),
                              std::size_t data_bytes = 64, bool fences = true);

}  // namespace loco::harness

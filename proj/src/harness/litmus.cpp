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

#include "loco/harness/litmus.hpp"

#include "loco/channels/shared_region.hpp"
#include "loco/harness/cluster.hpp"

namespace loco::harness {

const char* to_string(FenceVariant v) {
  switch (v) {
    case FenceVariant::kNone: return "none";
    case FenceVariant::kPair: return "pair";
    case FenceVariant::kPairWrongPeer: return "pair-wrong-peer";
    case FenceVariant::kThread: return "thread";
    case FenceVariant::kGlobal: return "global";
  }
  return "?";
}

LitmusOutcome message_passing(FenceVariant variant, std::uint64_t seed, PlacementModel model,
                              std::size_t data_bytes, bool fences) {
  if (data_bytes == 0 || data_bytes % kWordSize != 0) {
    throw UsageError("litmus data size must be a positive multiple of 8");
  }
  SimCluster c({.nodes = 4, .seed = seed, .model = model});
  const bool two_targets = variant == FenceVariant::kThread || variant == FenceVariant::kGlobal;
  const Bytes data(data_bytes, std::byte{0x5A});
  Bytes flag(kWordSize, std::byte{0});
  flag[0] = std::byte{1};

  std::vector<std::unique_ptr<SharedRegion>> d, f;
  for (NodeId n = 0; n < 4; ++n) {
    d.push_back(std::make_unique<SharedRegion>(c.mgr(n), "data", data_bytes));
    f.push_back(std::make_unique<SharedRegion>(c.mgr(n), "flag", kWordSize));
  }
  Manager& w = c.mgr(0);
  w.set_fences_enabled(fences);
  int data_threads_done = 0;
  bool fenced = false;
  LitmusOutcome out;

  auto writer = [&](NodeId target, bool also_three) {
    return [&, target, also_three] {
      w.wait_for_ready();
      d[0]->write(target, 0, data);
      if (also_three) d[0]->write(3, 0, data);
      if (variant == FenceVariant::kPair) w.fence(FenceScope::pair(1));
      if (variant == FenceVariant::kPairWrongPeer) w.fence(FenceScope::pair(3));
      if (variant == FenceVariant::kThread) w.fence(FenceScope::thread());
      ++data_threads_done;
    };
  };
  c.spawn(0, "data-a", writer(1, variant == FenceVariant::kThread));
  if (variant == FenceVariant::kGlobal) c.spawn(0, "data-b", writer(3, false));
  const int data_threads = variant == FenceVariant::kGlobal ? 2 : 1;
  if (variant == FenceVariant::kGlobal) {
    c.spawn(0, "fencer", [&] {
      w.wait_for_ready();
      while (data_threads_done < data_threads) c.rt().sleep_for(20);
      w.fence(FenceScope::global());
      fenced = true;
    });
  }
  c.spawn(0, "flag", [&] {
    w.wait_for_ready();
    while (data_threads_done < data_threads ||
           (variant == FenceVariant::kGlobal && !fenced)) {
      c.rt().sleep_for(20);
    }
    f[0]->write(1, 0, flag);
    w.fence(FenceScope::thread());
  });
  c.spawn(2, "reader", [&] {
    Manager& m = c.mgr(2);
    m.wait_for_ready();
    while (f[2]->read_sync(1, 0, kWordSize) != flag) c.rt().yield();
    if (d[2]->read_sync(1, 0, data_bytes) != data) out.stale = true;
    if (two_targets && d[2]->read_sync(3, 0, data_bytes) != data) out.stale = true;
  });
  for (NodeId n : {1u, 3u}) c.spawn(n, "idle", [&, n] { c.mgr(n).wait_for_ready(); });
  c.run();
  out.end_time = c.rt().now();
  return out;
}

}  // namespace loco::harness

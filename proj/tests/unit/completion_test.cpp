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

#include <gtest/gtest.h>

#include <random>

#include "loco/channels/shared_region.hpp"
#include "loco/completion.hpp"
#include "loco/harness/cluster.hpp"
#include "loco/sim_runtime.hpp"

namespace loco {
namespace {

WorkCompletion ok(OpId op) {
  WorkCompletion wc;
  wc.op_id = op.pack();
  return wc;
}

TEST(OpId, PackRoundTrip) {
  OpId op{7, 300, 0xfeedbeef};
  OpId back = OpId::unpack(op.pack());
  EXPECT_EQ(back.thread, 7);
  EXPECT_EQ(back.slot, 300);
  EXPECT_EQ(back.generation, 0xfeedbeefu);
}

TEST(Completion, FreshThreadGetsSlotZero) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 3);
  auto op = w.try_acquire({});
  ASSERT_TRUE(op);
  EXPECT_EQ(op->slot, 0);
  EXPECT_EQ(w.in_flight(), 1u);
}

TEST(Completion, WindowExhaustionIsBackpressure) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 128);
  std::vector<OpId> ops;
  for (int i = 0; i < 128; ++i) ops.push_back(*w.try_acquire({}));
  EXPECT_FALSE(w.try_acquire({}));
  TimeNs got_slot_at = -1;
  rt.spawn("app", [&] {
    t.acquire(w);
    got_slot_at = rt.now();
  });
  rt.schedule_at(5000, [&] {
    WorkCompletion wc = ok(ops[17]);
    t.complete(wc);
    t.signal_progress();
  });
  rt.run();
  EXPECT_GE(got_slot_at, 5000);
}

TEST(Completion, QueryFlipsOnlyAfterCompletion) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 3);
  OpId op = *w.try_acquire({});
  AckKey k = t.key_for(w, op);
  EXPECT_FALSE(k.query());
  WorkCompletion wc = ok(op);
  t.complete(wc);
  EXPECT_TRUE(k.query());
}

TEST(Completion, EmptyKeyAndUnionLaws) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 8);
  AckKey empty;
  EXPECT_TRUE(empty.query());
  OpId a = *w.try_acquire({});
  OpId b = *w.try_acquire({});
  AckKey ka = t.key_for(w, a), kb = t.key_for(w, b);
  EXPECT_EQ((empty | ka).size(), 1u);
  EXPECT_EQ((ka | ka).size(), 1u);
  AckKey both = ka | kb;
  EXPECT_EQ(both.size(), 2u);
  WorkCompletion wa = ok(a);
  t.complete(wa);
  EXPECT_TRUE(ka.query());
  EXPECT_FALSE(both.query());
  WorkCompletion wb = ok(b);
  t.complete(wb);
  EXPECT_TRUE(both.query());
}

TEST(Completion, CrossThreadUnionRejected) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w0 = t.add_thread(0, 3);
  auto& w1 = t.add_thread(1, 3);
  AckKey k0 = t.key_for(w0, *w0.try_acquire({}));
  AckKey k1 = t.key_for(w1, *w1.try_acquire({}));
  EXPECT_THROW(k0 |= k1, UsageError);
}

TEST(Completion, WaitReportsFailedSlots) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 3);
  OpId a = *w.try_acquire({});
  OpId b = *w.try_acquire({});
  AckKey k = t.key_for(w, a) | t.key_for(w, b);
  WorkCompletion wa = ok(a);
  WorkCompletion wb = ok(b);
  wb.status = CompletionStatus::kError;
  wb.error = "remote access error";
  t.complete(wa);
  t.complete(wb);
  std::vector<OpId> failed;
  rt.spawn("app", [&] {
    try {
      k.wait();
    } catch (const VerbError& e) {
      failed = e.failed();
    }
  });
  rt.run();
  ASSERT_EQ(failed.size(), 1u);
  EXPECT_EQ(failed[0].slot, b.slot);
}

TEST(Completion, WaitOnDoneKeyReturnsImmediately) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 3);
  OpId a = *w.try_acquire({});
  AckKey k = t.key_for(w, a);
  WorkCompletion wc = ok(a);
  t.complete(wc);
  TimeNs elapsed = -1;
  rt.spawn("app", [&] {
    TimeNs t0 = rt.now();
    k.wait();
    elapsed = rt.now() - t0;
  });
  rt.run();
  EXPECT_EQ(elapsed, 0);
}

// Slots are reused many times; a key must never report completion while its
// own operation is still outstanding, whatever later generations do.
TEST(Completion, NoCrossGenerationFalseCompletion) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 4);
  std::mt19937_64 rng(9);
  struct Live {
    OpId op;
    AckKey key;
  };
  std::vector<Live> live;
  std::vector<AckKey> done;
  for (int step = 0; step < 20000; ++step) {
    if (!live.empty() && (rng() % 2 == 0 || w.in_flight() == w.window())) {
      std::size_t i = rng() % live.size();
      EXPECT_FALSE(live[i].key.query());
      WorkCompletion wc = ok(live[i].op);
      t.complete(wc);
      EXPECT_TRUE(live[i].key.query());
      done.push_back(live[i].key);
      live.erase(live.begin() + static_cast<long>(i));
    } else {
      OpId op = *w.try_acquire({});
      live.push_back({op, t.key_for(w, op)});
    }
    for (const auto& l : live) ASSERT_FALSE(l.key.query());
    if (done.size() > 64) done.erase(done.begin());
    for (const auto& d : done) ASSERT_TRUE(d.query());
  }
}

TEST(Completion, ResultsLandInSinks) {
  SimRuntime rt;
  CompletionTracker t(rt);
  auto& w = t.add_thread(0, 3);
  Bytes buf(4);
  std::uint64_t prior = 0;
  OpId r = *w.try_acquire({buf, nullptr});
  OpId a = *w.try_acquire({{}, &prior});
  WorkCompletion wr = ok(r);
  wr.data = Bytes{std::byte{1}, std::byte{2}, std::byte{3}, std::byte{4}};
  WorkCompletion wa = ok(a);
  wa.prior = 41;
  t.complete(wr);
  t.complete(wa);
  EXPECT_EQ(buf, wr.data);
  EXPECT_EQ(prior, 41u);
  WorkCompletion again = ok(a);
  EXPECT_THROW(t.complete(again), Error);
}

// One pending remote write observed through the manager's polling agent.
TEST(Completion, PollerClearsBitsThroughManager) {
  harness::SimCluster c({.nodes = 2, .seed = 5});
  bool before = true, after = false;
  c.spawn_all("main", [&](Manager& m) {
    SharedRegion r(m, "r", 64);
    m.wait_for_ready();
    if (m.self() == 0) {
      Bytes v(8, std::byte{9});
      AckKey k = r.write(1, 0, v);
      before = k.query();
      k.wait();
      after = k.query();
    }
  });
  c.run();
  EXPECT_FALSE(before);
  EXPECT_TRUE(after);
}

TEST(Completion, WindowIsPerThreadAndConfigurable) {
  harness::SimCluster c({.nodes = 2, .seed = 6, .window = 128});
  std::size_t w = 0;
  c.spawn_all("main", [&](Manager& m) {
    SharedRegion r(m, "r", 64);
    m.wait_for_ready();
    w = m.thread().window->window();
  });
  c.run();
  EXPECT_EQ(w, 128u);
  SimRuntime rt;
  CompletionTracker t(rt);
  EXPECT_THROW(t.add_thread(0, 0), UsageError);
}

}  // namespace
}  // namespace loco

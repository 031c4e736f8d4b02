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

#include <algorithm>
#include <map>
#include <random>

#include "loco/channels/barrier.hpp"
#include "loco/channels/ringbuffer.hpp"
#include "loco/channels/shared_queue.hpp"
#include "loco/channels/shared_region.hpp"
#include "loco/channels/ticket_lock.hpp"
#include "loco/harness/cluster.hpp"

namespace loco {
namespace {

using harness::SimCluster;

template <typename T>
std::vector<std::unique_ptr<T>> per_node(SimCluster& c, auto make) {
  std::vector<std::unique_ptr<T>> out;
  for (NodeId n = 0; n < c.size(); ++n) out.push_back(make(c.mgr(n)));
  return out;
}

TEST(TicketLock, MutualExclusionAndConservation) {
  SimCluster c({.nodes = 3, .seed = 21, .model = PlacementModel::adversarial(8)});
  auto locks = per_node<TicketLock>(c, [](Manager& m) {
    return std::make_unique<TicketLock>(m, "lock", 0);
  });
  auto regions = per_node<SharedRegion>(c, [](Manager& m) {
    return std::make_unique<SharedRegion>(m, "counter", 8);
  });
  int occupancy = 0;
  int overlaps = 0;
  std::vector<std::uint64_t> grants;
  constexpr int kPerThread = 200;
  for (NodeId n = 0; n < 3; ++n) {
    for (int t = 0; t < 2; ++t) {
      c.spawn(n, "w" + std::to_string(t), [&, n] {
        Manager& m = c.mgr(n);
        m.wait_for_ready();
        for (int i = 0; i < kPerThread; ++i) {
          locks[n]->lock();
          if (occupancy++ != 0) ++overlaps;
          grants.push_back(locks[n]->held_ticket());
          Bytes b = regions[n]->read_sync(2, 0, 8);
          std::uint64_t v = load_as<std::uint64_t>(b) + 1;
          regions[n]->write(2, 0, as_bytes_of(v));
          --occupancy;
          locks[n]->unlock(FenceScope::pair(2));
        }
      });
    }
  }
  c.run();
  EXPECT_EQ(overlaps, 0);
  EXPECT_EQ(c.mgr(2).memory().local_load_word(*c.mgr(2).memory().find("counter.data"), 0),
            3u * 2 * kPerThread);
  EXPECT_TRUE(std::is_sorted(grants.begin(), grants.end()));
  std::uint64_t remote = 0;
  for (auto& l : locks) remote += l->stats().remote_acquisitions;
  EXPECT_EQ(grants.back() + 1, remote);
}

TEST(TicketLock, LocalHandoverIssuesNoRemoteVerbs) {
  SimCluster c({.nodes = 2, .seed = 22});
  auto locks = per_node<TicketLock>(c, [](Manager& m) {
    return std::make_unique<TicketLock>(m, "lock", 1);
  });
  std::uint64_t second_verbs = 99;
  bool first_done = false;
  c.spawn(1, "idle", [&] { c.mgr(1).wait_for_ready(); });
  c.spawn(0, "a", [&] {
    Manager& m = c.mgr(0);
    m.wait_for_ready();
    locks[0]->lock();
    first_done = true;
    c.rt().sleep_for(10'000);
    locks[0]->unlock();
  });
  c.spawn(0, "b", [&] {
    Manager& m = c.mgr(0);
    m.wait_for_ready();
    while (!first_done) c.rt().sleep_for(100);
    std::uint64_t before = m.thread().remote_verbs + m.nic().verbs_posted();
    locks[0]->lock();
    second_verbs = m.thread().remote_verbs + m.nic().verbs_posted() - before;
    locks[0]->unlock();
  });
  c.run();
  EXPECT_EQ(second_verbs, 0u);
  EXPECT_EQ(locks[0]->stats().handovers, 1u);
  EXPECT_EQ(locks[0]->stats().remote_acquisitions, 1u);
}

TEST(TicketLock, HandoverBudgetLetsRemoteNodesIn) {
  SimCluster c({.nodes = 2, .seed = 23});
  auto locks = per_node<TicketLock>(c, [](Manager& m) {
    return std::make_unique<TicketLock>(m, "lock", 0);
  });
  std::vector<NodeId> order;
  for (NodeId n = 0; n < 2; ++n) {
    for (int t = 0; t < 3; ++t) {
      c.spawn(n, "w", [&, n] {
        c.mgr(n).wait_for_ready();
        for (int i = 0; i < 30; ++i) {
          locks[n]->lock();
          order.push_back(n);
          c.rt().sleep_for(2000);
          locks[n]->unlock();
        }
      });
    }
  }
  c.run();
  std::size_t longest = 0, run = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    run = (i > 0 && order[i] == order[i - 1]) ? run + 1 : 1;
    longest = std::max(longest, run);
  }
  EXPECT_EQ(order.size(), 180u);
  EXPECT_LE(longest, static_cast<std::size_t>(TicketLock::kDefaultHandoverBudget) + 1);
}

TEST(TicketLock, UnlockByNonHolderRejected) {
  SimCluster c({.nodes = 2});
  auto locks = per_node<TicketLock>(c, [](Manager& m) {
    return std::make_unique<TicketLock>(m, "lock", 0);
  });
  bool threw = false, relock_threw = false;
  c.spawn(1, "idle", [&] { c.mgr(1).wait_for_ready(); });
  c.spawn(0, "a", [&] {
    c.mgr(0).wait_for_ready();
    try {
      locks[0]->unlock();
    } catch (const UsageError&) {
      threw = true;
    }
    locks[0]->lock();
    try {
      locks[0]->lock();
    } catch (const UsageError&) {
      relock_threw = true;
    }
    locks[0]->unlock();
  });
  c.run();
  EXPECT_TRUE(threw);
  EXPECT_TRUE(relock_threw);
}

TEST(RingBuffer, SmallMessagesInOrder) {
  SimCluster c({.nodes = 3, .seed = 31});
  std::map<NodeId, std::vector<std::string>> got;
  c.spawn_all("main", [&](Manager& m) {
    RingBuffer rb(m, "rb", 0);
    m.wait_for_ready();
    if (m.self() == 0) {
      for (const char* s : {"a", "b", "c"}) rb.send(to_bytes(s));
      rb.wait_acked(3);
    } else {
      for (int i = 0; i < 3; ++i) got[m.self()].push_back(to_string(rb.recv()));
    }
  });
  c.run();
  std::vector<std::string> expect{"a", "b", "c"};
  EXPECT_EQ(got[1], expect);
  EXPECT_EQ(got[2], expect);
}

TEST(RingBuffer, MixedSizesDeliveredIntact) {
  SimCluster c({.nodes = 4, .seed = 32, .model = PlacementModel::adversarial(8)});
  constexpr int kMessages = 2000;
  std::vector<Bytes> sent;
  std::map<NodeId, int> mismatches, received;
  c.spawn_all("main", [&](Manager& m) {
    RingBuffer rb(m, "rb", 0, {.slots = 16, .entry_payload = 64});
    m.wait_for_ready();
    if (m.self() == 0) {
      std::mt19937_64 rng(5);
      for (int i = 0; i < kMessages; ++i) {
        Bytes msg(1 + rng() % 512);
        for (auto& b : msg) b = std::byte(rng());
        sent.push_back(msg);
        rb.send(msg);
      }
    } else {
      for (int i = 0; i < kMessages; ++i) {
        Bytes msg = rb.recv();
        while (sent.size() <= static_cast<std::size_t>(i)) c.rt().yield();
        if (msg != sent[i]) ++mismatches[m.self()];
        ++received[m.self()];
      }
      EXPECT_FALSE(rb.try_recv().has_value());
    }
  });
  c.run();
  for (NodeId r = 1; r < 4; ++r) {
    EXPECT_EQ(received[r], kMessages);
    EXPECT_EQ(mismatches[r], 0);
  }
}

TEST(RingBuffer, BackpressureAtCapacity) {
  SimCluster c({.nodes = 2, .seed = 33});
  int sent_before_stall = -1;
  bool reader_go = false;
  std::vector<std::string> got;
  c.spawn_all("main", [&](Manager& m) {
    RingBuffer rb(m, "rb", 0, {.slots = 4, .entry_payload = 8});
    m.wait_for_ready();
    if (m.self() == 0) {
      int n = 0;
      while (rb.try_send(to_bytes("m" + std::to_string(n)))) ++n;
      sent_before_stall = n;
      reader_go = true;
      for (int i = n; i < 10; ++i) rb.send(to_bytes("m" + std::to_string(i)));
    } else {
      while (!reader_go) c.rt().sleep_for(1000);
      for (int i = 0; i < 10; ++i) got.push_back(to_string(rb.recv()));
    }
  });
  c.run();
  EXPECT_EQ(sent_before_stall, 4);
  ASSERT_EQ(got.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(got[i], "m" + std::to_string(i));
}

TEST(RingBuffer, OversizedAndMisplacedCallsRejected) {
  SimCluster c({.nodes = 2});
  int errors = 0;
  c.spawn_all("main", [&](Manager& m) {
    RingBuffer rb(m, "rb", 0, {.slots = 2, .entry_payload = 8});
    m.wait_for_ready();
    try {
      if (m.self() == 0) {
        rb.send(Bytes(17));
      } else {
        rb.send(Bytes(1));
      }
    } catch (const UsageError&) {
      ++errors;
    }
    if (m.self() == 0) {
      try {
        rb.recv();
      } catch (const UsageError&) {
        ++errors;
      }
    }
  });
  c.run();
  EXPECT_EQ(errors, 3);
}

TEST(SharedQueue, SequentialFifo) {
  SimCluster c({.nodes = 2, .seed = 41});
  std::vector<std::optional<std::uint64_t>> popped;
  c.spawn_all("main", [&](Manager& m) {
    SharedQueue q(m, "q");
    Barrier b(m, "b", 2);
    m.wait_for_ready();
    if (m.self() == 0) {
      for (std::uint64_t v : {1, 2, 3}) q.push(v);
    }
    b.waiting();
    if (m.self() == 1) {
      for (int i = 0; i < 4; ++i) popped.push_back(q.pop());
    }
  });
  c.run();
  ASSERT_EQ(popped.size(), 4u);
  EXPECT_EQ(popped[0], 1u);
  EXPECT_EQ(popped[1], 2u);
  EXPECT_EQ(popped[2], 3u);
  EXPECT_FALSE(popped[3].has_value());
}

TEST(SharedQueue, ConservationAndPerProducerOrder) {
  SimCluster c({.nodes = 3, .seed = 42, .model = PlacementModel::adversarial(8)});
  constexpr std::uint64_t kPerNode = 300;
  std::vector<std::uint64_t> all_popped;
  std::map<NodeId, std::vector<std::uint64_t>> popped_by;
  c.spawn_all("main", [&](Manager& m) {
    SharedQueue q(m, "q", {.capacity = 64});
    Barrier b(m, "b", 3);
    m.wait_for_ready();
    std::uint64_t pushed = 0;
    std::mt19937_64 rng(m.self());
    std::size_t empties = 0;
    while (pushed < kPerNode || empties < 50) {
      if (pushed < kPerNode && rng() % 2 == 0) {
        q.push((std::uint64_t{m.self()} << 32) | pushed++);
      } else if (auto v = q.pop()) {
        popped_by[m.self()].push_back(*v);
        all_popped.push_back(*v);
      } else if (pushed == kPerNode) {
        ++empties;
        c.rt().sleep_for(500);
      }
    }
    b.waiting();
  });
  c.run();
  std::sort(all_popped.begin(), all_popped.end());
  std::vector<std::uint64_t> expect;
  for (std::uint64_t n = 0; n < 3; ++n) {
    for (std::uint64_t i = 0; i < kPerNode; ++i) expect.push_back((n << 32) | i);
  }
  EXPECT_EQ(all_popped, expect);
  // A single consumer sees each producer's values in push order.
  for (auto& [node, seq] : popped_by) {
    std::map<std::uint64_t, std::uint64_t> last;
    for (std::uint64_t v : seq) {
      std::uint64_t producer = v >> 32, idx = v & 0xffffffff;
      if (last.contains(producer)) {
        EXPECT_GT(idx, last[producer]) << "consumer " << node;
      }
      last[producer] = idx;
    }
  }
}

TEST(SharedQueue, FullPolicyReport) {
  SimCluster c({.nodes = 2, .seed = 43});
  int accepted = 0;
  c.spawn_all("main", [&](Manager& m) {
    SharedQueue q(m, "q", {.capacity = 8, .full = SharedQueue::FullPolicy::kReport});
    m.wait_for_ready();
    if (m.self() == 0) {
      for (int i = 0; i < 12; ++i) accepted += q.push(static_cast<std::uint64_t>(i)) ? 1 : 0;
    }
  });
  c.run();
  EXPECT_EQ(accepted, 8);
}

TEST(SharedQueue, WrapsManyRounds) {
  SimCluster c({.nodes = 2, .seed = 44});
  std::vector<std::uint64_t> got;
  c.spawn_all("main", [&](Manager& m) {
    SharedQueue q(m, "q", {.capacity = 4});
    m.wait_for_ready();
    if (m.self() == 0) {
      for (std::uint64_t i = 0; i < 100; ++i) q.push(i);
    } else {
      while (got.size() < 100) {
        if (auto v = q.pop()) {
          got.push_back(*v);
        } else {
          c.rt().sleep_for(200);
        }
      }
    }
  });
  c.run();
  ASSERT_EQ(got.size(), 100u);
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(got[i], i);
}

}  // namespace
}  // namespace loco

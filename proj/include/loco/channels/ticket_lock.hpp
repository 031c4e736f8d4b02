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

#include <atomic>
#include <cstdint>
#include <mutex>

#include "loco/channels/atomic_var.hpp"

namespace loco {

// Cluster-wide ticket lock. Threads on one node first queue locally; the
// head of the local queue takes a ticket with a remote fetch-and-add and
// spins on now_serving. A node that holds the lock may pass it straight to
// the next local waiter without touching the network, up to a budget of
// consecutive handovers so remote nodes are not starved.
class TicketLock : public Channel {
 public:
  static constexpr int kDefaultHandoverBudget = 16;

  struct Stats {
    std::uint64_t acquisitions = 0;
    std::uint64_t remote_acquisitions = 0;
    std::uint64_t handovers = 0;
  };

  TicketLock(Manager& m, const std::string& name, NodeId host = 0);
  TicketLock(Channel& parent, const std::string& name, NodeId host = 0);

  void lock();
  // Fences `scope` and then releases, handing over locally when possible.
  void unlock(FenceScope scope = FenceScope::thread());

  // The ticket the node currently holds the lock under.
  std::uint64_t held_ticket() const;
  bool held_by_caller();
  void set_handover_budget(int budget) { budget_ = budget; }
  Stats stats() const;

 private:
  AtomicVar next_ticket_;
  AtomicVar now_serving_;

  mutable std::mutex mu_;
  WaitQueue local_q_;
  std::uint64_t local_next_ = 0;
  std::atomic<std::uint64_t> local_serving_{0};
  bool node_owns_ = false;
  std::uint64_t ticket_ = 0;
  int handovers_ = 0;
  int budget_ = kDefaultHandoverBudget;
  int holder_ = -1;
  Stats stats_;
};

}  // namespace loco

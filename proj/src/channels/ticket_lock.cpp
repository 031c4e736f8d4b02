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

#include "loco/channels/ticket_lock.hpp"

namespace loco {

TicketLock::TicketLock(Manager& m, const std::string& name, NodeId host)
    : Channel(m, name),
      next_ticket_(*this, "next_ticket", host),
      now_serving_(*this, "now_serving", host) {
  activate();
}

TicketLock::TicketLock(Channel& parent, const std::string& name, NodeId host)
    : Channel(parent, name),
      next_ticket_(*this, "next_ticket", host),
      now_serving_(*this, "now_serving", host) {}

void TicketLock::lock() {
  Runtime& rt = manager().runtime();
  int me = manager().thread().id;
  std::uint64_t mine;
  {
    std::lock_guard lock(mu_);
    if (holder_ == me) throw UsageError("ticket_lock '" + name() + "' already held by caller");
    mine = local_next_++;
  }
  rt.wait(local_q_, [&] { return local_serving_.load(std::memory_order_acquire) == mine; });

  bool owned;
  {
    std::lock_guard lock(mu_);
    owned = node_owns_;
  }
  if (!owned) {
    std::uint64_t t = next_ticket_.fetch_add(1);
    Backoff backoff(rt, 100, 2000);
    while (now_serving_.load() != t) backoff.pause();
    std::lock_guard lock(mu_);
    node_owns_ = true;
    ticket_ = t;
    handovers_ = 0;
    ++stats_.remote_acquisitions;
  }
  std::lock_guard lock(mu_);
  holder_ = me;
  ++stats_.acquisitions;
}

void TicketLock::unlock(FenceScope scope) {
  int me = manager().thread().id;
  {
    std::lock_guard lock(mu_);
    if (holder_ != me) {
      throw UsageError("unlock of ticket_lock '" + name() + "' by a thread that does not hold it");
    }
  }
  manager().fence(scope);
  bool handover;
  {
    std::lock_guard lock(mu_);
    holder_ = -1;
    bool waiter = local_next_ > local_serving_.load(std::memory_order_relaxed) + 1;
    handover = waiter && handovers_ < budget_;
    if (handover) {
      ++handovers_;
      ++stats_.handovers;
    } else {
      node_owns_ = false;
    }
  }
  if (!handover) now_serving_.fetch_add(1);
  local_serving_.fetch_add(1, std::memory_order_release);
  manager().runtime().notify_all(local_q_);
}

std::uint64_t TicketLock::held_ticket() const {
  std::lock_guard lock(mu_);
  return ticket_;
}

bool TicketLock::held_by_caller() {
  int me = manager().thread().id;
  std::lock_guard lock(mu_);
  return holder_ == me;
}

TicketLock::Stats TicketLock::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace loco

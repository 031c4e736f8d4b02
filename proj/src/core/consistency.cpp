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

// Fences. A write's completion does not imply its placement, so every fence
// flushes with a zero-length read on each dirty queue pair: the read cannot
// complete before all earlier writes on that queue pair are placed.

#include "loco/consistency.hpp"

#include "loco/manager.hpp"

namespace loco {

std::string FenceScope::describe() const {
  switch (kind) {
    case Kind::kNone: return "none";
    case Kind::kPair: return "pair(" + std::to_string(peer) + ")";
    case Kind::kThread: return "thread";
    case Kind::kGlobal: return "global";
  }
  return "?";
}

namespace {

// Posts a flush on qp if the ledger is dirty. The caller holds qp.gate.
bool flush_locked(Manager& m, ThreadState& caller, QueuePair& qp, LedgerEntry& ledger,
                  AckKey& keys) {
  if (!ledger.dirty()) return false;
  CompletionTracker& tracker = m.tracker();
  OpId op = tracker.acquire(*caller.window);
  VerbRequest req;
  req.kind = VerbKind::kZeroLengthRead;
  req.target_node = qp.peer();
  req.op_id = op.pack();
  try {
    m.nic().post(qp, std::move(req));
  } catch (...) {
    tracker.cancel(*caller.window, op);
    throw;
  }
  keys |= tracker.key_for(*caller.window, op);
  ledger.clear();
  ++caller.remote_verbs;
  return true;
}

}  // namespace

void Manager::fence(FenceScope scope) {
  if (scope.kind == FenceScope::Kind::kNone) return;
  fences_.fetch_add(1, std::memory_order_relaxed);
  if (!fences_enabled_.load()) {
    fences_skipped_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  ThreadState& me = thread();
  AckKey keys;
  std::uint64_t flushes = 0;
  auto flush = [&](ThreadState& owner, NodeId peer) {
    if (peer == self() || !owner.qps[peer]) return;
    QueuePair& q = *owner.qps[peer];
    std::lock_guard gate(q.gate);
    if (flush_locked(*this, me, q, owner.ledger[peer], keys)) ++flushes;
  };
  switch (scope.kind) {
    case FenceScope::Kind::kPair:
      if (scope.peer >= num_nodes()) throw UsageError("fence on unknown peer");
      flush(me, scope.peer);
      break;
    case FenceScope::Kind::kThread:
      for (NodeId p = 0; p < num_nodes(); ++p) flush(me, p);
      break;
    case FenceScope::Kind::kGlobal:
      // Gates are taken one at a time in ascending (thread, peer) order.
      for (ThreadState* ts : thread_snapshot()) {
        for (NodeId p = 0; p < num_nodes(); ++p) flush(*ts, p);
      }
      break;
    case FenceScope::Kind::kNone:
      break;
  }
  if (flushes == 0) {
    fences_skipped_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  flush_reads_.fetch_add(flushes, std::memory_order_relaxed);
  keys.wait();
}

FenceStats Manager::fence_stats() const {
  return FenceStats{fences_.load(), flush_reads_.load(), fences_skipped_.load()};
}

std::vector<std::pair<std::uint16_t, NodeId>> Manager::unfenced() const {
  std::vector<std::pair<std::uint16_t, NodeId>> out;
  for (ThreadState* ts : thread_snapshot()) {
    for (NodeId p = 0; p < num_nodes(); ++p) {
      if (p == self() || !ts->qps[p]) continue;
      std::lock_guard gate(ts->qps[p]->gate);
      if (ts->ledger[p].dirty()) out.emplace_back(ts->id, p);
    }
  }
  return out;
}

}  // namespace loco

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

#include "loco/harness/bench.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <random>

#include "loco/channels/barrier.hpp"
#include "loco/channels/shared_queue.hpp"
#include "loco/channels/shared_region.hpp"
#include "loco/channels/ticket_lock.hpp"

namespace loco::harness {

namespace {

// Runs body(t) for t in [0, threads) as tasks of the calling node and waits
// for all of them; body(0) runs on the caller.
void parallel(Runtime& rt, NodeId node, std::size_t threads,
              const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> done{0};
  WaitQueue q;
  for (std::size_t t = 1; t < threads; ++t) {
    rt.spawn("n" + std::to_string(node) + "/worker" + std::to_string(t), [&, t] {
      body(t);
      done.fetch_add(1);
      rt.notify_all(q);
    });
  }
  body(0);
  rt.wait(q, [&] { return done.load() == threads - 1; });
}

// Spawns one main task per local node.
void per_node(Cluster& c, const std::string& name, const std::function<void(NodeId)>& main) {
  for (NodeId n : c.local_nodes()) c.spawn(n, name, [n, &main] { main(n); });
  c.run();
}

std::uint64_t thread_seed(std::uint64_t seed, NodeId node, std::size_t thread) {
  return mix64(seed ^ mix64((static_cast<std::uint64_t>(node) << 32) | thread));
}

Bytes word_bytes(std::uint64_t v) {
  Bytes b(kWordSize);
  store_as(std::span(b), 0, v);
  return b;
}

OpResult from_kv(KvStatus s) {
  switch (s) {
    case KvStatus::kOk: return OpResult::kOk;
    case KvStatus::kAlreadyExists: return OpResult::kAlreadyExists;
    case KvStatus::kNotFound: return OpResult::kNotFound;
    case KvStatus::kCapacityExhausted: return OpResult::kCapacityExhausted;
  }
  return OpResult::kOk;
}

}  // namespace

BarrierResult bench_barrier(Cluster& c, std::size_t iters) {
  BarrierResult out;
  out.iterations = iters;
  const std::size_t n = c.size();
  std::vector<std::atomic<std::uint64_t>> arrived(n);
  const NodeId first = c.local_nodes().front();
  std::atomic<std::uint64_t> violations{0};
  per_node(c, "barrier", [&](NodeId node) {
    Manager& m = c.mgr(node);
    Barrier b(m, "bench", n);
    m.wait_for_ready();
    b.waiting();
    for (std::uint64_t e = 1; e <= iters; ++e) {
      arrived[node].store(e);
      TimeNs t = c.runtime().now();
      b.waiting();
      TimeNs lat = c.runtime().now() - t;
      for (NodeId peer : c.local_nodes()) {
        if (arrived[peer].load() < e) violations.fetch_add(1);
      }
      if (node == first) out.latencies.push_back(lat);
    }
    b.waiting();
  });
  out.violations = violations.load();
  return out;
}

LockResult bench_locks(Cluster& c, const LockParams& p) {
  if (p.threads == 0 || (p.mode == LockMode::kTransactional && p.accounts < 2)) {
    throw UsageError("lock benchmark needs threads >= 1 and at least two accounts");
  }
  const std::size_t n = c.size();
  LockResult out;
  out.num_locks = p.mode == LockMode::kSingle
                      ? 1
                      : static_cast<std::size_t>(std::min<std::uint64_t>(
                            p.accounts, std::max<std::size_t>(1, p.locks_per_thread) * n * p.threads));
  const std::uint64_t per_node_accounts = (p.accounts + n - 1) / n;
  std::atomic<int> inside{0};
  std::atomic<std::uint64_t> violations{0}, ops{0}, remote{0};
  std::mutex grants_mu;
  std::map<NodeId, TimeNs> elapsed;
  std::mutex elapsed_mu;
  std::vector<std::uint64_t> before(n), after(n);

  per_node(c, "locks", [&](NodeId node) {
    Manager& m = c.mgr(node);
    std::vector<std::unique_ptr<TicketLock>> locks;
    for (std::size_t i = 0; i < out.num_locks; ++i) {
      locks.push_back(std::make_unique<TicketLock>(m, "lock" + std::to_string(i), i % n));
    }
    SharedRegion counter(m, "counter", kWordSize);
    std::unique_ptr<SharedRegion> accounts;
    if (p.mode == LockMode::kTransactional) {
      accounts = std::make_unique<SharedRegion>(m, "accounts", per_node_accounts * kWordSize);
    }
    Barrier b(m, "sync", n);
    m.wait_for_ready();
    if (accounts) {
      const RegionDesc& mine = accounts->desc_at(node);
      for (std::uint64_t a = node; a < p.accounts; a += n) {
        m.memory().local_store(mine, a / n * kWordSize, word_bytes(p.initial_balance));
        before[node] += p.initial_balance;
      }
    }
    b.waiting();
    TimeNs start = c.runtime().now();
    parallel(c.runtime(), node, p.threads, [&](std::size_t t) {
      std::mt19937_64 rng(thread_seed(p.seed, node, t));
      for (std::uint64_t i = 0; i < p.ops_per_thread; ++i) {
        if (p.mode == LockMode::kSingle) {
          TicketLock& l = *locks[0];
          l.lock();
          if (inside.fetch_add(1) != 0) violations.fetch_add(1);
          if (p.record_grants) {
            std::lock_guard g(grants_mu);
            out.grant_tickets.push_back(l.held_ticket());
          }
          Bytes v = counter.read_sync(0, 0, kWordSize);
          counter.write(0, 0, word_bytes(load_as<std::uint64_t>(v) + 1));
          inside.fetch_sub(1);
          l.unlock();
        } else {
          std::uniform_int_distribution<std::uint64_t> pick(0, p.accounts - 1);
          std::uint64_t a = pick(rng), bacc = pick(rng);
          while (bacc == a) bacc = pick(rng);
          std::uint64_t amount = std::uniform_int_distribution<std::uint64_t>(1, 100)(rng);
          std::size_t la = a % out.num_locks, lb = bacc % out.num_locks;
          std::size_t lo = std::min(la, lb), hi = std::max(la, lb);
          locks[lo]->lock();
          if (hi != lo) locks[hi]->lock();
          auto at = [&](std::uint64_t acc) { return std::pair{static_cast<NodeId>(acc % n), acc / n * kWordSize}; };
          auto [na, oa] = at(a);
          auto [nb, ob] = at(bacc);
          std::uint64_t ba = load_as<std::uint64_t>(accounts->read_sync(na, oa, kWordSize));
          std::uint64_t bb = load_as<std::uint64_t>(accounts->read_sync(nb, ob, kWordSize));
          std::uint64_t moved = std::min(amount, ba);
          accounts->write(na, oa, word_bytes(ba - moved));
          accounts->write(nb, ob, word_bytes(bb + moved));
          if (hi != lo) locks[hi]->unlock();
          locks[lo]->unlock();
        }
        ops.fetch_add(1);
      }
    });
    TimeNs end = c.runtime().now();
    {
      std::lock_guard g(elapsed_mu);
      elapsed[node] = end - start;
    }
    m.fence(FenceScope::global());
    b.waiting();
    for (auto& l : locks) remote.fetch_add(l->stats().remote_acquisitions);
    if (node == 0) {
      out.counter = load_as<std::uint64_t>(counter.read_sync(0, 0, kWordSize));
    }
    if (accounts) {
      const RegionDesc& mine = accounts->desc_at(node);
      for (std::uint64_t a = node; a < p.accounts; a += n) {
        after[node] += m.memory().local_load_word(mine, a / n * kWordSize);
      }
    }
    b.waiting();
  });
  out.ops = ops.load();
  out.exclusion_violations = violations.load();
  out.remote_acquisitions = remote.load();
  for (auto& [node, e] : elapsed) out.elapsed_ns = std::max(out.elapsed_ns, e);
  for (NodeId node : c.local_nodes()) {
    out.balance_before += before[node];
    out.balance_after += after[node];
  }
  return out;
}

std::uint64_t KvResult::ops() const {
  std::uint64_t s = 0;
  for (const auto& n : nodes) s += n.reads + n.updates;
  return s;
}

std::uint64_t KvResult::empty_prefilled_reads() const {
  std::uint64_t s = 0;
  for (const auto& n : nodes) s += n.empty_prefilled_reads;
  return s;
}

TimeNs KvResult::elapsed_ns() const {
  TimeNs e = 0;
  for (const auto& n : nodes) e = std::max(e, n.elapsed_ns);
  return e;
}

double KvResult::throughput() const {
  TimeNs e = elapsed_ns();
  return e > 0 ? static_cast<double>(ops()) * 1e9 / static_cast<double>(e) : 0;
}

KvResult bench_kv(Cluster& c, const WorkloadSpec& spec) {
  if (spec.threads == 0 || spec.window == 0 || spec.keyspace == 0 ||
      !(spec.read_fraction >= 0 && spec.read_fraction <= 1) ||
      !(spec.prefill >= 0 && spec.prefill <= 1)) {
    throw UsageError("invalid kv workload");
  }
  const std::size_t n = c.size();
  const std::uint64_t prefilled = static_cast<std::uint64_t>(spec.prefill * spec.keyspace);
  const std::size_t slots = static_cast<std::size_t>(spec.keyspace / n + spec.keyspace / (4 * n) + 16);
  KvResult out;
  out.prefilled = prefilled;
  std::mutex out_mu;
  KeyChooser chooser(spec.distribution, spec.keyspace, spec.theta);

  per_node(c, "kv", [&](NodeId node) {
    Manager& m = c.mgr(node);
    KvStore kv(m, "kv", {.slots_per_node = slots});
    Barrier b(m, "sync", n);
    m.wait_for_ready();
    const std::size_t groups = n * spec.threads;
    parallel(c.runtime(), node, spec.threads, [&](std::size_t t) {
      for (std::uint64_t k = node * spec.threads + t; k < prefilled; k += groups) {
        KvStatus s = kv.insert(mix64(k), k + 1);
        if (s != KvStatus::kOk) {
          throw Error("prefill insert of key index " + std::to_string(k) + " returned " +
                      to_string(s));
        }
      }
    });
    b.waiting();
    KvNodeStats stats;
    stats.node = node;
    std::mutex stats_mu;
    TimeNs start = c.runtime().now();
    parallel(c.runtime(), node, spec.threads, [&](std::size_t t) {
      std::mt19937_64 rng(thread_seed(spec.seed, node, t));
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::vector<KvStore::PendingRead> ring(spec.window);
      std::vector<std::uint64_t> ring_idx(spec.window);
      std::size_t head = 0, inflight = 0;
      std::uint64_t reads = 0, updates = 0, empty = 0;
      auto retire = [&] {
        std::size_t slot = (head + spec.window - inflight) % spec.window;
        auto v = kv.complete(ring[slot]);
        if (!v && ring_idx[slot] < prefilled) ++empty;
        --inflight;
      };
      for (std::uint64_t i = 0; i < spec.ops_per_thread; ++i) {
        std::uint64_t idx = chooser(rng);
        if (coin(rng) < spec.read_fraction) {
          if (inflight == spec.window) retire();
          ring_idx[head] = idx;
          kv.read_async(mix64(idx), ring[head]);
          head = (head + 1) % spec.window;
          ++inflight;
          ++reads;
        } else {
          kv.update(mix64(idx), rng());
          ++updates;
        }
      }
      while (inflight > 0) retire();
      std::lock_guard g(stats_mu);
      stats.reads += reads;
      stats.updates += updates;
      stats.empty_prefilled_reads += empty;
    });
    stats.elapsed_ns = c.runtime().now() - start;
    {
      std::lock_guard g(out_mu);
      out.nodes.push_back(stats);
    }
    b.waiting();
  });
  std::sort(out.nodes.begin(), out.nodes.end(),
            [](const auto& a, const auto& b) { return a.node < b.node; });
  return out;
}

CheckRun kv_check_run(Cluster& c, const KvCheckParams& p, CheckOptions options) {
  const std::size_t n = c.size();
  History history;
  std::map<std::pair<NodeId, std::size_t>, History::Log*> logs;
  for (NodeId node : c.local_nodes()) {
    for (std::size_t t = 0; t < p.threads; ++t) {
      logs[{node, t}] = &history.log(node, static_cast<std::uint32_t>(t));
    }
  }
  per_node(c, "kv-check", [&](NodeId node) {
    Manager& m = c.mgr(node);
    KvStore kv(m, "kv", p.store);
    Barrier b(m, "sync", n);
    m.wait_for_ready();
    b.waiting();
    parallel(c.runtime(), node, p.threads, [&](std::size_t t) {
      History::Log& log = *logs.at({node, t});
      std::mt19937_64 rng(thread_seed(p.seed, node, t));
      std::uniform_int_distribution<std::uint64_t> key(0, p.keys - 1);
      std::uniform_int_distribution<int> pick(0, 99);
      for (std::uint64_t i = 0; i < p.ops_per_thread; ++i) {
        std::uint64_t k = key(rng);
        std::uint64_t value = (static_cast<std::uint64_t>(node * p.threads + t + 1) << 32) | (i + 1);
        int r = pick(rng);
        if (r < p.insert_pct) {
          auto tok = log.begin(OpType::kInsert, k, value);
          log.end(tok, from_kv(kv.insert(k, value)));
        } else if (r < p.insert_pct + p.remove_pct) {
          auto tok = log.begin(OpType::kRemove, k);
          log.end(tok, from_kv(kv.remove(k)));
        } else if (r < p.insert_pct + p.remove_pct + p.update_pct) {
          auto tok = log.begin(OpType::kUpdate, k, value);
          log.end(tok, from_kv(kv.update(k, value)));
        } else {
          auto tok = log.begin(OpType::kRead, k);
          auto v = kv.read(k);
          log.end(tok, OpResult::kOk, v);
        }
      }
    });
    b.waiting();
  });
  CheckRun run;
  run.history = history.merged();
  run.verdict = check_map_linearizable(run.history, options);
  return run;
}

CheckRun queue_check_run(Cluster& c, const QueueCheckParams& p, CheckOptions options) {
  const std::size_t n = c.size();
  History history;
  std::map<std::pair<NodeId, std::size_t>, History::Log*> logs;
  for (NodeId node : c.local_nodes()) {
    for (std::size_t t = 0; t < p.threads; ++t) {
      logs[{node, t}] = &history.log(node, static_cast<std::uint32_t>(t));
    }
  }
  per_node(c, "queue-check", [&](NodeId node) {
    Manager& m = c.mgr(node);
    SharedQueue q(m, "q", {.capacity = p.capacity, .full = SharedQueue::FullPolicy::kReport});
    Barrier b(m, "sync", n);
    m.wait_for_ready();
    b.waiting();
    parallel(c.runtime(), node, p.threads, [&](std::size_t t) {
      History::Log& log = *logs.at({node, t});
      std::mt19937_64 rng(thread_seed(p.seed, node, t));
      for (std::uint64_t i = 0; i < p.ops_per_thread; ++i) {
        if (rng() % 2 == 0) {
          std::uint64_t value = (static_cast<std::uint64_t>(node * p.threads + t + 1) << 32) | (i + 1);
          auto tok = log.begin(OpType::kPush, 0, value);
          log.end(tok, q.push(value) ? OpResult::kOk : OpResult::kFull);
        } else {
          auto tok = log.begin(OpType::kPop, 0);
          auto v = q.pop();
          log.end(tok, v ? OpResult::kOk : OpResult::kEmpty, v);
        }
      }
    });
    b.waiting();
  });
  CheckRun run;
  run.history = history.merged();
  run.verdict = check_queue_linearizable(run.history, options);
  return run;
}

}  // namespace loco::harness

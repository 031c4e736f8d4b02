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

#include "loco/harness/checker.hpp"
#include "loco/harness/cluster.hpp"
#include "loco/harness/history.hpp"
#include "loco/harness/zipf.hpp"
#include "loco/kvstore.hpp"

namespace loco::harness {

struct BarrierResult {
  std::size_t iterations = 0;
  // Per-iteration latency seen by the lowest local node.
  std::vector<TimeNs> latencies;
  // Times a node left an epoch before every local node had entered it.
  std::uint64_t violations = 0;
};

BarrierResult bench_barrier(Cluster& c, std::size_t iters);

enum class LockMode { kSingle, kTransactional };

struct LockParams {
  LockMode mode = LockMode::kSingle;
  std::size_t threads = 1;
  std::uint64_t ops_per_thread = 10'000;
  std::uint64_t accounts = 100'000;
  // Locks per application thread; accounts map onto locks by index.
  std::size_t locks_per_thread = 128;
  std::uint64_t initial_balance = 1000;
  std::uint64_t seed = 1;
  bool record_grants = false;
};

struct LockResult {
  std::uint64_t ops = 0;
  TimeNs elapsed_ns = 0;
  std::size_t num_locks = 0;
  // Single mode: final counter value.
  std::uint64_t counter = 0;
  // Transactional mode: sum over all accounts held by local nodes.
  std::uint64_t balance_before = 0;
  std::uint64_t balance_after = 0;
  std::uint64_t exclusion_violations = 0;
  std::uint64_t remote_acquisitions = 0;
  // Single mode with record_grants: the global ticket behind each grant, in
  // grant order.
  std::vector<std::uint64_t> grant_tickets;

  double throughput() const {
    return elapsed_ns > 0 ? static_cast<double>(ops) * 1e9 / static_cast<double>(elapsed_ns) : 0;
  }
};

LockResult bench_locks(Cluster& c, const LockParams& p);

struct WorkloadSpec {
  double read_fraction = 1.0;
  KeyDistribution distribution = KeyDistribution::kUniform;
  double theta = ZipfianGenerator::kDefaultTheta;
  std::uint64_t keyspace = 10'000;
  double prefill = 0.8;
  std::uint64_t ops_per_thread = 10'000;
  std::size_t threads = 1;
  std::size_t window = kDefaultWindow;
  std::uint64_t seed = 1;
};

struct KvNodeStats {
  NodeId node = 0;
  std::uint64_t reads = 0;
  std::uint64_t updates = 0;
  std::uint64_t empty_prefilled_reads = 0;
  TimeNs elapsed_ns = 0;
};

struct KvResult {
  std::vector<KvNodeStats> nodes;
  std::uint64_t prefilled = 0;

  std::uint64_t ops() const;
  std::uint64_t empty_prefilled_reads() const;
  TimeNs elapsed_ns() const;
  double throughput() const;
};

// Store keys are mix64(key index); reads are pipelined up to spec.window
// per thread, writes are updates.
KvResult bench_kv(Cluster& c, const WorkloadSpec& spec);

struct KvCheckParams {
  std::size_t threads = 2;
  std::uint64_t ops_per_thread = 40;
  std::uint64_t keys = 8;
  std::uint64_t seed = 1;
  // Operation mix in percent; reads take the remainder.
  int insert_pct = 30;
  int remove_pct = 20;
  int update_pct = 25;
  KvStore::Options store{.slots_per_node = 64, .num_locks = 8};
};

struct CheckRun {
  std::vector<HistoryRecord> history;
  Verdict verdict;
};

// Random inserts, removes, updates and reads over a few keys, recorded and
// checked for linearizability.
CheckRun kv_check_run(Cluster& c, const KvCheckParams& p, CheckOptions options = {});

struct QueueCheckParams {
  std::size_t threads = 2;
  std::uint64_t ops_per_thread = 8;
  std::size_t capacity = 64;
  std::uint64_t seed = 1;
};

CheckRun queue_check_run(Cluster& c, const QueueCheckParams& p, CheckOptions options = {});

}  // namespace loco::harness

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

// One-sided verb model. The contract every backend honours:
//
//  R1  a write is placed in tear_granularity-sized units, each atomically;
//      remote read snapshots are taken in the same units.
//  R2  writes posted on one queue pair are placed in issue order.
//  R3  a read, zero-length read or atomic completes only after every prior
//      write on its queue pair is fully placed at the target.
//  R4  atomics on one word are totally ordered with each other and with the
//      target node's local word atomics.
//  R5  every posted verb yields exactly one completion.
//
// Write completion does not imply placement unless the placement delay is
// zero.

#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loco/common.hpp"
#include "loco/memory.hpp"
#include "loco/runtime.hpp"

namespace loco {

enum class VerbKind : std::uint8_t {
  kWrite,
  kRead,
  kFetchAdd,
  kCompareSwap,
  kZeroLengthRead,
};

const char* to_string(VerbKind k);

struct VerbRequest {
  VerbKind kind = VerbKind::kWrite;
  NodeId target_node = 0;
  // Descriptor of the target region; may be null for kZeroLengthRead. Must
  // stay alive until the verb completes.
  const RegionDesc* region = nullptr;
  std::uint64_t offset = 0;
  std::uint32_t length = 0;
  Bytes payload;               // kWrite
  std::uint64_t operand = 0;   // add value, or expected value for CAS
  std::uint64_t desired = 0;   // CAS only
  std::uint64_t op_id = 0;     // completion-tracking slot id
};

enum class CompletionStatus : std::uint8_t { kOk, kError };

struct WorkCompletion {
  std::uint64_t op_id = 0;
  CompletionStatus status = CompletionStatus::kOk;
  VerbKind kind = VerbKind::kWrite;
  Bytes data;               // bytes read
  std::uint64_t prior = 0;  // atomics: value before the operation
  std::string error;
};

// One reliable connection from a thread to a peer. Posting is normally done
// only by the owning thread; `gate` lets another thread post under external
// synchronization (global fence).
class QueuePair {
 public:
  QueuePair(Runtime& rt, NodeId local, NodeId peer, std::uint32_t thread)
      : gate(rt), local_(local), peer_(peer), thread_(thread) {}
  virtual ~QueuePair() = default;
  QueuePair(const QueuePair&) = delete;
  QueuePair& operator=(const QueuePair&) = delete;

  NodeId local() const { return local_; }
  NodeId peer() const { return peer_; }
  std::uint32_t owner_thread() const { return thread_; }
  std::uint64_t posted() const { return posted_; }

  SpinGate gate;

 protected:
  friend class Nic;
  std::uint64_t posted_ = 0;

 private:
  NodeId local_;
  NodeId peer_;
  std::uint32_t thread_;
};

// Placement and latency model of the in-process backend.
struct PlacementModel {
  enum class Delay {
    kZero,         // placement precedes completion
    kExponential,  // exponential delay with mean mean_delay_ns
    kAdversarial,  // half immediate, half uniform in [mean, 10 * mean]
  };
  std::size_t tear_granularity = 256;  // positive multiple of 8
  Delay delay = Delay::kExponential;
  TimeNs mean_delay_ns = 1500;
  TimeNs latency_ns = 1000;         // one-way network latency
  TimeNs latency_jitter_ns = 400;
  TimeNs unit_gap_ns = 30;          // between packets of one verb
  TimeNs control_latency_ns = 4000;

  static PlacementModel zero();
  static PlacementModel adversarial(std::size_t tear = 256);
};

const char* to_string(PlacementModel::Delay d);
PlacementModel::Delay parse_delay(const std::string& s);

// A node's attachment to the fabric: its network memory, queue pairs,
// completion queue and control channel.
class Nic {
 public:
  virtual ~Nic() = default;

  virtual NodeId self() const = 0;
  virtual std::size_t num_nodes() const = 0;
  virtual NodeMemory& memory() = 0;
  virtual Runtime& runtime() = 0;

  RegionDesc register_region(const std::string& name, std::size_t length) {
    return memory().register_region(name, length);
  }

  virtual std::unique_ptr<QueuePair> create_qp(NodeId peer,
                                               std::uint32_t thread) = 0;

  // Validates and starts a verb. Throws FabricError for an unknown region,
  // an out-of-bounds range, or a misaligned or mis-sized atomic.
  void post(QueuePair& qp, VerbRequest req);

  // Drains completions not yet delivered.
  virtual std::vector<WorkCompletion> poll() = 0;
  // Signalled whenever a completion is queued.
  virtual WaitQueue& completion_signal() = 0;
  virtual bool has_completions() = 0;

  // Ordered, reliable control stream to each peer.
  virtual void send_control(NodeId peer, Bytes msg) = 0;
  virtual std::optional<std::pair<NodeId, Bytes>> recv_control() = 0;
  virtual WaitQueue& control_signal() = 0;
  virtual bool has_control() = 0;

  std::uint64_t verbs_posted() const { return verbs_posted_; }

 protected:
  virtual void do_post(QueuePair& qp, VerbRequest&& req) = 0;
  static void validate_shape(const VerbRequest& req);

 private:
  std::atomic<std::uint64_t> verbs_posted_{0};
};

// Splits [addr, addr + len) at multiples of `granularity`.
std::vector<std::pair<std::uint64_t, std::size_t>> split_units(
    std::uint64_t addr, std::size_t len, std::size_t granularity);

}  // namespace loco

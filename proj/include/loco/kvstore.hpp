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

// Distributed key-value store with lock-free reads.
//
// Each node owns an array of value slots in its memory and a local index
// mapping every key in the store to (node, slot, counter). Inserts,
// removes and updates take the key's ticket lock. Index changes are
// broadcast on the changing node's tracker ringbuffer and applied by a
// monitor task on every other node.

#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>

#include "loco/channels/ringbuffer.hpp"
#include "loco/channels/ticket_lock.hpp"

namespace loco {

enum class KvStatus { kOk, kAlreadyExists, kNotFound, kCapacityExhausted };

const char* to_string(KvStatus s);

// value | counter | valid | checksum, one 32-byte record per slot.
struct KvSlot {
  static constexpr std::size_t kBytes = 32;

  std::uint64_t value = 0;
  std::uint64_t counter = 0;
  std::uint64_t valid = 0;
  std::uint64_t checksum = 0;

  static std::uint64_t checksum_of(std::uint64_t value, std::uint64_t counter,
                                   std::uint64_t valid);
  static KvSlot make(std::uint64_t value, std::uint64_t counter, bool valid);
  bool intact() const { return checksum == checksum_of(value, counter, valid); }
  // Zero memory is a never-used slot and counts as intact.
  bool never_used() const { return value == 0 && counter == 0 && valid == 0 && checksum == 0; }

  std::array<std::byte, kBytes> encode() const;
  static KvSlot decode(std::span<const std::byte> b);
};

struct IndexEntry {
  NodeId node = 0;
  std::uint64_t slot = 0;
  std::uint64_t counter = 0;
  bool operator==(const IndexEntry&) const = default;
};

struct TrackerMsg {
  enum class Op : std::uint8_t { kInsert = 1, kDelete = 2 };
  static constexpr std::size_t kBytes = 33;

  Op op = Op::kInsert;
  std::uint64_t key = 0;
  IndexEntry entry;

  Bytes encode() const;
  // Throws FabricError on a malformed message.
  static TrackerMsg decode(std::span<const std::byte> b);
};

class KvStore : public Channel {
 public:
  static constexpr std::size_t kDefaultLocks = 1024;

  struct Options {
    std::size_t slots_per_node = 4096;
    std::size_t num_locks = kDefaultLocks;
    std::size_t tracker_slots = 64;
    // Test-only fault injection.
    bool skip_update_fence = false;
    bool skip_ack_wait = false;
  };

  struct Stats {
    std::uint64_t reads = 0;
    std::uint64_t read_retries = 0;
    std::uint64_t counter_mismatches = 0;
    std::uint64_t invalid_seen = 0;
    std::uint64_t applied = 0;
  };

  // A read issued with read_async; finish it with complete().
  struct PendingRead {
    std::uint64_t key = 0;
    bool found = false;
    IndexEntry entry;
    std::array<std::byte, KvSlot::kBytes> buf{};
    AckKey ack;
  };

  KvStore(Manager& m, const std::string& name, Options options);
  KvStore(Manager& m, const std::string& name) : KvStore(m, name, Options{}) {}
  ~KvStore() override;

  KvStatus insert(std::uint64_t key, std::uint64_t value);
  KvStatus remove(std::uint64_t key);
  KvStatus update(std::uint64_t key, std::uint64_t value);
  std::optional<std::uint64_t> read(std::uint64_t key);

  void read_async(std::uint64_t key, PendingRead& out);
  std::optional<std::uint64_t> complete(PendingRead& p);

  const Options& options() const { return options_; }
  TicketLock& lock_for(std::uint64_t key) { return *locks_[key % locks_.size()]; }
  std::uint64_t lock_acquisitions() const;
  Stats stats() const;
  std::vector<std::pair<std::uint64_t, IndexEntry>> index_snapshot() const;
  std::size_t free_slots() const;

 private:
  void monitor_loop();
  void apply(const TrackerMsg& msg);
  std::optional<IndexEntry> lookup(std::uint64_t key) const;
  void write_slot(const IndexEntry& e, const KvSlot& s);
  KvSlot read_slot(const IndexEntry& e);
  void broadcast(const TrackerMsg& msg);
  // Classifies a slot read for `e`: value, Empty, or nullopt-retry.
  enum class Outcome { kValue, kEmpty, kRetry };
  Outcome classify(const IndexEntry& e, const KvSlot& s);
  const RegionDesc& data_at(NodeId n);

  Options options_;
  const RegionDesc* data_ = nullptr;
  std::vector<std::atomic<const RegionDesc*>> data_regions_;
  std::vector<std::unique_ptr<TicketLock>> locks_;
  std::vector<std::unique_ptr<RingBuffer>> trackers_;

  mutable std::shared_mutex index_mu_;
  std::unordered_map<std::uint64_t, IndexEntry> index_;

  mutable std::mutex slots_mu_;
  std::vector<std::uint64_t> free_;
  std::vector<std::uint64_t> counters_;

  std::atomic<bool> stop_{false};
  std::atomic<bool> monitor_exited_{false};
  WaitQueue monitor_q_;

  std::atomic<std::uint64_t> reads_{0}, read_retries_{0}, counter_mismatches_{0},
      invalid_seen_{0}, applied_{0};
};

}  // namespace loco

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

// Bounded multi-producer multi-consumer FIFO over a cyclic array of slots
// striped across all participants. Slot i of the ring lives on node
// i % num_nodes. Each slot is {value, seq}; in round r the slot is empty
// while seq == 2r and full while seq == 2r + 1.
//
// push takes a position with fetch-and-add on tail. pop claims a position
// with compare-and-swap on head, so a pop never claims past tail and an
// empty queue is reported without blocking.

#pragma once

#include <optional>

#include "loco/channels/atomic_var.hpp"

namespace loco {

class SharedQueue : public Channel {
 public:
  static constexpr std::size_t kDefaultCapacity = 1024;

  enum class FullPolicy { kBlock, kReport };

  struct Options {
    std::size_t capacity = kDefaultCapacity;
    NodeId index_host = 0;
    FullPolicy full = FullPolicy::kBlock;
  };

  SharedQueue(Manager& m, const std::string& name, Options options);
  SharedQueue(Manager& m, const std::string& name) : SharedQueue(m, name, Options{}) {}
  SharedQueue(Channel& parent, const std::string& name, Options options);

  std::size_t capacity() const { return options_.capacity; }

  // Returns false only under FullPolicy::kReport when the queue is full.
  bool push(std::uint64_t value);
  // nullopt means Empty.
  std::optional<std::uint64_t> pop();

  // Pops that found their slot claimed but not yet published.
  std::uint64_t publish_waits() const { return publish_waits_.load(); }

 private:
  static constexpr std::size_t kSlotBytes = 16;

  void init();
  NodeId slot_node(std::uint64_t pos) const;
  std::uint64_t slot_offset(std::uint64_t pos) const;
  const RegionDesc& slots_at(NodeId n);
  std::uint64_t read_seq(std::uint64_t pos);
  void wait_seq(std::uint64_t pos, std::uint64_t want);
  void fill(std::uint64_t pos, std::uint64_t value);

  Options options_;
  AtomicVar head_;
  AtomicVar tail_;
  std::vector<std::atomic<const RegionDesc*>> slot_regions_;
  std::atomic<std::uint64_t> publish_waits_{0};
};

}  // namespace loco

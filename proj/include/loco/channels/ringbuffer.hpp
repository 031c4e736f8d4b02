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

// One-to-many broadcast log. Every node other than the writer is a reader
// and holds a copy of the ring in its own memory; the writer pushes entries
// into all copies. Readers acknowledge consumed entries through an SST so
// the writer can reuse slots.
//
// Entry layout: payload | length word | checksum | seq. The first three go
// out in one write and seq in a second write on the same queue pair, so a
// reader that sees the expected seq also sees the payload.

#pragma once

#include <atomic>
#include <optional>

#include "loco/channels/sst.hpp"

namespace loco {

class RingBuffer : public Channel {
 public:
  struct Options {
    std::size_t slots = 64;
    std::size_t entry_payload = 64;
  };

  RingBuffer(Manager& m, const std::string& name, NodeId writer, Options options);
  RingBuffer(Manager& m, const std::string& name, NodeId writer)
      : RingBuffer(m, name, writer, Options{}) {}
  RingBuffer(Channel& parent, const std::string& name, NodeId writer, Options options);
  RingBuffer(Channel& parent, const std::string& name, NodeId writer)
      : RingBuffer(parent, name, writer, Options{}) {}

  NodeId writer() const { return writer_; }
  bool is_writer() const { return writer_ == self(); }
  const Options& options() const { return options_; }
  std::size_t max_message() const { return options_.slots * options_.entry_payload; }

  // Writer only. Blocks while the ring lacks free slots for the message.
  // `end` receives the entry count once the message is in the ring; every
  // reader has consumed the message when min_acked() reaches it.
  AckKey send(std::span<const std::byte> msg, std::uint64_t* end = nullptr);
  // Returns nullopt instead of blocking when the ring is full.
  std::optional<AckKey> try_send(std::span<const std::byte> msg, std::uint64_t* end = nullptr);
  void wait_acked(std::uint64_t end);

  // Reader only. One receiving thread per reader node. try_recv returns
  // nullopt when no entry is waiting; once the first fragment of a message
  // is seen it blocks for the rest.
  Bytes recv();
  std::optional<Bytes> try_recv();
  // Publishes the consumed count to the writer now rather than lazily.
  void flush_acks() { ack(true); }

  // Entries every reader has consumed.
  std::uint64_t min_acked() const;
  std::uint64_t entries_sent() const { return next_entry_.load(); }
  std::uint64_t stalls() const { return stalls_.load(); }

 protected:
  void expected_from(NodeId peer, std::vector<std::string>& out) const override;

 private:
  static constexpr std::uint64_t kMoreFragments = 1ULL << 63;

  void init();
  std::size_t entry_bytes() const { return options_.entry_payload + 24; }
  std::size_t entries_for(std::size_t len) const;
  std::uint64_t checksum(std::span<const std::byte> payload, std::uint64_t len_word,
                         std::uint64_t seq) const;
  void check_send(std::span<const std::byte> msg) const;
  bool has_room(std::size_t entries) const;
  AckKey write_entries(std::span<const std::byte> msg, std::uint64_t* end);
  std::optional<Bytes> poll_message(bool block);
  bool entry_ready() const;
  bool poll_entry(Bytes& assembled, bool& done);
  void ack(bool force);

  NodeId writer_;
  Options options_;
  Sst<std::uint64_t> acks_;
  const RegionDesc* ring_ = nullptr;

  // Writer side.
  SpinGate send_gate_;
  std::atomic<std::uint64_t> next_entry_{0};
  std::atomic<std::uint64_t> stalls_{0};
  std::vector<const RegionDesc*> remote_rings_;

  // Reader side.
  std::uint64_t consumed_ = 0;
  std::uint64_t acked_ = 0;
  Bytes scratch_;
};

}  // namespace loco

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

#include "loco/channels/ringbuffer.hpp"

#include <limits>

namespace loco {

RingBuffer::RingBuffer(Manager& m, const std::string& name, NodeId writer, Options options)
    : Channel(m, name),
      writer_(writer),
      options_(options),
      acks_(*this, "acks"),
      send_gate_(m.runtime()) {
  init();
  activate();
}

RingBuffer::RingBuffer(Channel& parent, const std::string& name, NodeId writer,
                       Options options)
    : Channel(parent, name),
      writer_(writer),
      options_(options),
      acks_(*this, "acks"),
      send_gate_(parent.manager().runtime()) {
  init();
}

void RingBuffer::init() {
  if (writer_ >= num_nodes()) throw UsageError("ringbuffer writer outside the cluster");
  if (options_.slots == 0 || options_.entry_payload == 0 ||
      options_.entry_payload % kWordSize != 0) {
    throw UsageError("ringbuffer needs at least one slot and a word-multiple entry payload");
  }
  if (!is_writer()) ring_ = &add_region("ring", options_.slots * entry_bytes(), false);
  remote_rings_.assign(num_nodes(), nullptr);
  scratch_.resize(options_.entry_payload + 16);
}

void RingBuffer::expected_from(NodeId peer, std::vector<std::string>& out) const {
  Channel::expected_from(peer, out);
  if (is_writer() && peer != writer_) out.push_back(region_name("ring"));
}

std::size_t RingBuffer::entries_for(std::size_t len) const {
  return std::max<std::size_t>(1, (len + options_.entry_payload - 1) / options_.entry_payload);
}

std::uint64_t RingBuffer::checksum(std::span<const std::byte> payload, std::uint64_t len_word,
                                   std::uint64_t seq) const {
  std::uint64_t h = fnv1a(payload);
  h = fnv1a(as_bytes_of(len_word), h);
  return fnv1a(as_bytes_of(seq), h);
}

std::uint64_t RingBuffer::min_acked() const {
  std::uint64_t low = std::numeric_limits<std::uint64_t>::max();
  for (NodeId n = 0; n < num_nodes(); ++n) {
    if (n == writer_) continue;
    std::uint64_t v = acks_.has_row(n) ? acks_.row(n).load() : 0;
    low = std::min(low, v);
  }
  return low;
}

void RingBuffer::check_send(std::span<const std::byte> msg) const {
  if (!is_writer()) {
    throw UsageError("send on ringbuffer '" + name() + "' at non-writer node " +
                     std::to_string(self()));
  }
  if (msg.size() > max_message()) {
    throw UsageError("message of " + std::to_string(msg.size()) +
                     " bytes exceeds ringbuffer capacity of " + std::to_string(max_message()));
  }
}

bool RingBuffer::has_room(std::size_t entries) const {
  std::uint64_t low = min_acked();
  if (low == std::numeric_limits<std::uint64_t>::max()) return true;
  return next_entry_.load() + entries <= low + options_.slots;
}

AckKey RingBuffer::send(std::span<const std::byte> msg, std::uint64_t* end) {
  check_send(msg);
  std::lock_guard gate(send_gate_);
  std::size_t n = entries_for(msg.size());
  if (!has_room(n)) {
    ++stalls_;
    Backoff backoff(manager().runtime(), 50, 2000);
    while (!has_room(n)) backoff.pause();
  }
  return write_entries(msg, end);
}

std::optional<AckKey> RingBuffer::try_send(std::span<const std::byte> msg, std::uint64_t* end) {
  check_send(msg);
  std::lock_guard gate(send_gate_);
  if (!has_room(entries_for(msg.size()))) {
    ++stalls_;
    return std::nullopt;
  }
  return write_entries(msg, end);
}

void RingBuffer::wait_acked(std::uint64_t end) {
  Backoff backoff(manager().runtime(), 50, 2000);
  while (min_acked() < end) backoff.pause();
}

AckKey RingBuffer::write_entries(std::span<const std::byte> msg, std::uint64_t* end) {
  const std::size_t p = options_.entry_payload;
  std::size_t n = entries_for(msg.size());
  Bytes block(p + 16);
  AckKey key;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t from = i * p;
    std::size_t len = std::min(p, msg.size() - std::min(msg.size(), from));
    std::uint64_t e = next_entry_.load();
    std::uint64_t seq = e + 1;
    std::uint64_t len_word = len | (i + 1 < n ? kMoreFragments : 0);
    std::fill(block.begin(), block.end(), std::byte{0});
    if (len > 0) std::memcpy(block.data(), msg.data() + from, len);
    store_as(std::span(block), p, len_word);
    store_as(std::span(block), p + 8, checksum(std::span(block).first(len), len_word, seq));
    std::uint64_t off = (e % options_.slots) * entry_bytes();
    for (NodeId r = 0; r < num_nodes(); ++r) {
      if (r == writer_) continue;
      if (remote_rings_[r] == nullptr) remote_rings_[r] = &region_at(r, "ring");
      key |= manager().write(r, *remote_rings_[r], off, block);
      key |= manager().write(r, *remote_rings_[r], off + p + 16, as_bytes_of(seq));
    }
    next_entry_.store(e + 1);
  }
  if (end != nullptr) *end = next_entry_.load();
  return key;
}

bool RingBuffer::entry_ready() const {
  std::uint64_t off = (consumed_ % options_.slots) * entry_bytes();
  return manager().memory().local_load_word(*ring_, off + options_.entry_payload + 16) ==
         consumed_ + 1;
}

bool RingBuffer::poll_entry(Bytes& assembled, bool& done) {
  const std::size_t p = options_.entry_payload;
  std::uint64_t e = consumed_;
  std::uint64_t off = (e % options_.slots) * entry_bytes();
  NodeMemory& mem = manager().memory();
  if (mem.local_load_word(*ring_, off + p + 16) != e + 1) return false;
  mem.local_load(*ring_, off, scratch_);
  std::uint64_t len_word = load_as<std::uint64_t>(scratch_, p);
  std::uint64_t len = len_word & ~kMoreFragments;
  if (len > p) return false;
  std::uint64_t sum = load_as<std::uint64_t>(scratch_, p + 8);
  if (sum != checksum(std::span(scratch_).first(len), len_word, e + 1)) return false;
  assembled.insert(assembled.end(), scratch_.begin(), scratch_.begin() + static_cast<long>(len));
  done = (len_word & kMoreFragments) == 0;
  ++consumed_;
  ack(false);
  return true;
}

void RingBuffer::ack(bool force) {
  if (consumed_ == acked_) return;
  std::uint64_t lazy = std::max<std::size_t>(1, options_.slots / 4);
  if (!force && consumed_ - acked_ < lazy) return;
  acks_.store_mine(consumed_);
  acks_.push(writer_);
  acked_ = consumed_;
}

std::optional<Bytes> RingBuffer::poll_message(bool block) {
  if (is_writer()) {
    throw UsageError("recv on ringbuffer '" + name() + "' at its writer");
  }
  Bytes assembled;
  bool started = false;
  Backoff backoff(manager().runtime(), 20, 1000);
  while (true) {
    bool done = false;
    if (poll_entry(assembled, done)) {
      if (done) {
        if (!entry_ready()) ack(true);
        return assembled;
      }
      started = true;
      backoff.reset();
      continue;
    }
    ack(true);
    if (!block && !started) return std::nullopt;
    backoff.pause();
  }
}

Bytes RingBuffer::recv() { return *poll_message(true); }

std::optional<Bytes> RingBuffer::try_recv() { return poll_message(false); }

}  // namespace loco

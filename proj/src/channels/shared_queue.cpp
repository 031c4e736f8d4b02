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

#include "loco/channels/shared_queue.hpp"

namespace loco {

namespace {

constexpr int kSpinsBeforeBackoff = 16;

}  // namespace

SharedQueue::SharedQueue(Manager& m, const std::string& name, Options options)
    : Channel(m, name),
      options_(options),
      head_(*this, "head", options.index_host),
      tail_(*this, "tail", options.index_host),
      slot_regions_(m.num_nodes()) {
  init();
  activate();
}

SharedQueue::SharedQueue(Channel& parent, const std::string& name, Options options)
    : Channel(parent, name),
      options_(options),
      head_(*this, "head", options.index_host),
      tail_(*this, "tail", options.index_host),
      slot_regions_(parent.num_nodes()) {
  init();
}

void SharedQueue::init() {
  if (options_.capacity == 0) throw UsageError("shared_queue capacity must be positive");
  std::size_t per_node = (options_.capacity + num_nodes() - 1) / num_nodes();
  slot_regions_[self()] = &add_region("slots", per_node * kSlotBytes);
}

NodeId SharedQueue::slot_node(std::uint64_t pos) const {
  return static_cast<NodeId>((pos % options_.capacity) % num_nodes());
}

std::uint64_t SharedQueue::slot_offset(std::uint64_t pos) const {
  return (pos % options_.capacity) / num_nodes() * kSlotBytes;
}

const RegionDesc& SharedQueue::slots_at(NodeId n) {
  const RegionDesc* r = slot_regions_[n].load(std::memory_order_acquire);
  if (r == nullptr) {
    r = &region_at(n, "slots");
    slot_regions_[n].store(r, std::memory_order_release);
  }
  return *r;
}

std::uint64_t SharedQueue::read_seq(std::uint64_t pos) {
  NodeId n = slot_node(pos);
  std::uint64_t off = slot_offset(pos) + 8;
  if (n == self()) return manager().memory().local_load_word(slots_at(n), off);
  std::byte buf[kWordSize];
  manager().read(n, slots_at(n), off, buf).wait();
  return load_as<std::uint64_t>(buf);
}

void SharedQueue::wait_seq(std::uint64_t pos, std::uint64_t want) {
  Runtime& rt = manager().runtime();
  Backoff backoff(rt, 50, 2000);
  for (int spins = 0; read_seq(pos) != want; ++spins) {
    if (spins < kSpinsBeforeBackoff) {
      rt.yield();
    } else {
      backoff.pause();
    }
  }
}

void SharedQueue::fill(std::uint64_t pos, std::uint64_t value) {
  std::uint64_t round = pos / options_.capacity;
  wait_seq(pos, 2 * round);
  NodeId n = slot_node(pos);
  std::uint64_t off = slot_offset(pos);
  std::uint64_t full = 2 * round + 1;
  // Value then seq on one queue pair: the seq write cannot land first.
  manager().write(n, slots_at(n), off, as_bytes_of(value));
  manager().write(n, slots_at(n), off + 8, as_bytes_of(full));
}

bool SharedQueue::push(std::uint64_t value) {
  if (options_.full == FullPolicy::kBlock) {
    fill(tail_.fetch_add(1), value);
    return true;
  }
  while (true) {
    std::uint64_t t = tail_.load();
    std::uint64_t h = head_.load();
    if (t >= h + options_.capacity) return false;
    if (tail_.compare_swap(t, t + 1) == t) {
      fill(t, value);
      return true;
    }
  }
}

std::optional<std::uint64_t> SharedQueue::pop() {
  std::uint64_t h;
  while (true) {
    h = head_.load();
    std::uint64_t t = tail_.load();
    if (h >= t) return std::nullopt;
    if (head_.compare_swap(h, h + 1) == h) break;
  }
  std::uint64_t round = h / options_.capacity;
  if (read_seq(h) != 2 * round + 1) {
    ++publish_waits_;
    wait_seq(h, 2 * round + 1);
  }
  NodeId n = slot_node(h);
  std::uint64_t off = slot_offset(h);
  std::uint64_t value;
  if (n == self()) {
    value = manager().memory().local_load_word(slots_at(n), off);
  } else {
    std::byte buf[kWordSize];
    manager().read(n, slots_at(n), off, buf).wait();
    value = load_as<std::uint64_t>(buf);
  }
  std::uint64_t empty_next = 2 * (round + 1);
  manager().write(n, slots_at(n), off + 8, as_bytes_of(empty_next));
  return value;
}

}  // namespace loco

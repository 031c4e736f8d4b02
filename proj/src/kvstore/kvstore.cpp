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

#include "loco/kvstore.hpp"

#include <algorithm>

namespace loco {

namespace {

constexpr int kSpinsBeforeBackoff = 64;

}  // namespace

const char* to_string(KvStatus s) {
  switch (s) {
    case KvStatus::kOk:
      return "ok";
    case KvStatus::kAlreadyExists:
      return "already_exists";
    case KvStatus::kNotFound:
      return "not_found";
    case KvStatus::kCapacityExhausted:
      return "capacity_exhausted";
  }
  return "?";
}

std::uint64_t KvSlot::checksum_of(std::uint64_t value, std::uint64_t counter,
                                  std::uint64_t valid) {
  std::uint64_t h = fnv1a(as_bytes_of(value));
  h = fnv1a(as_bytes_of(counter), h);
  return fnv1a(as_bytes_of(valid), h);
}

KvSlot KvSlot::make(std::uint64_t value, std::uint64_t counter, bool valid) {
  KvSlot s{value, counter, valid ? 1u : 0u, 0};
  s.checksum = checksum_of(s.value, s.counter, s.valid);
  return s;
}

std::array<std::byte, KvSlot::kBytes> KvSlot::encode() const {
  std::array<std::byte, kBytes> out;
  std::span<std::byte> o(out);
  store_as(o, 0, value);
  store_as(o, 8, counter);
  store_as(o, 16, valid);
  store_as(o, 24, checksum);
  return out;
}

KvSlot KvSlot::decode(std::span<const std::byte> b) {
  return {load_as<std::uint64_t>(b, 0), load_as<std::uint64_t>(b, 8),
          load_as<std::uint64_t>(b, 16), load_as<std::uint64_t>(b, 24)};
}

Bytes TrackerMsg::encode() const {
  Bytes out(kBytes);
  std::span<std::byte> o(out);
  out[0] = static_cast<std::byte>(op);
  store_as(o, 1, key);
  store_as(o, 9, static_cast<std::uint64_t>(entry.node));
  store_as(o, 17, entry.slot);
  store_as(o, 25, entry.counter);
  return out;
}

TrackerMsg TrackerMsg::decode(std::span<const std::byte> b) {
  if (b.size() != kBytes) throw FabricError("tracker message of wrong size");
  TrackerMsg m;
  auto op = static_cast<std::uint8_t>(b[0]);
  if (op != 1 && op != 2) throw FabricError("tracker message with unknown op");
  m.op = static_cast<Op>(op);
  m.key = load_as<std::uint64_t>(b, 1);
  m.entry.node = static_cast<NodeId>(load_as<std::uint64_t>(b, 9));
  m.entry.slot = load_as<std::uint64_t>(b, 17);
  m.entry.counter = load_as<std::uint64_t>(b, 25);
  return m;
}

KvStore::KvStore(Manager& m, const std::string& name, Options options)
    : Channel(m, name), options_(options), data_regions_(m.num_nodes()) {
  if (options_.slots_per_node == 0 || options_.num_locks == 0) {
    throw UsageError("kvstore needs at least one slot and one lock");
  }
  data_ = &add_region("data", options_.slots_per_node * KvSlot::kBytes);
  data_regions_[self()] = data_;
  for (std::size_t i = 0; i < options_.num_locks; ++i) {
    locks_.push_back(std::make_unique<TicketLock>(*this, "lock" + std::to_string(i),
                                                  static_cast<NodeId>(i % num_nodes())));
  }
  RingBuffer::Options ring{.slots = options_.tracker_slots, .entry_payload = 40};
  for (NodeId n = 0; n < num_nodes(); ++n) {
    trackers_.push_back(
        std::make_unique<RingBuffer>(*this, "tracker" + std::to_string(n), n, ring));
  }
  counters_.assign(options_.slots_per_node, 0);
  free_.reserve(options_.slots_per_node);
  for (std::size_t s = options_.slots_per_node; s-- > 0;) free_.push_back(s);
  activate();
  m.runtime().spawn("kv-monitor-" + std::to_string(self()), [this] { monitor_loop(); },
                    TaskKind::kDaemon);
}

KvStore::~KvStore() {
  stop_ = true;
  if (!monitor_exited_) {
    manager().runtime().wait(monitor_q_, [this] { return monitor_exited_.load(); });
  }
}

const RegionDesc& KvStore::data_at(NodeId n) {
  const RegionDesc* r = data_regions_[n].load(std::memory_order_acquire);
  if (r == nullptr) {
    r = &region_at(n, "data");
    data_regions_[n].store(r, std::memory_order_release);
  }
  return *r;
}

std::optional<IndexEntry> KvStore::lookup(std::uint64_t key) const {
  std::shared_lock lock(index_mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void KvStore::write_slot(const IndexEntry& e, const KvSlot& s) {
  auto rec = s.encode();
  manager().write(e.node, data_at(e.node), e.slot * KvSlot::kBytes, rec);
}

KvSlot KvStore::read_slot(const IndexEntry& e) {
  std::array<std::byte, KvSlot::kBytes> buf;
  manager().read(e.node, data_at(e.node), e.slot * KvSlot::kBytes, buf).wait();
  return KvSlot::decode(buf);
}

void KvStore::broadcast(const TrackerMsg& msg) {
  std::uint64_t end = 0;
  trackers_[self()]->send(msg.encode(), &end);
  if (!options_.skip_ack_wait) trackers_[self()]->wait_acked(end);
}

KvStatus KvStore::insert(std::uint64_t key, std::uint64_t value) {
  TicketLock& lock = lock_for(key);
  lock.lock();
  if (lookup(key)) {
    lock.unlock(FenceScope::none());
    return KvStatus::kAlreadyExists;
  }
  IndexEntry e{self(), 0, 0};
  {
    std::lock_guard g(slots_mu_);
    if (free_.empty()) {
      lock.unlock(FenceScope::none());
      return KvStatus::kCapacityExhausted;
    }
    e.slot = free_.back();
    free_.pop_back();
    e.counter = ++counters_[e.slot];
  }
  write_slot(e, KvSlot::make(value, e.counter, false));
  {
    std::unique_lock g(index_mu_);
    index_[key] = e;
  }
  broadcast({TrackerMsg::Op::kInsert, key, e});
  write_slot(e, KvSlot::make(value, e.counter, true));
  lock.unlock(FenceScope::none());
  return KvStatus::kOk;
}

KvStatus KvStore::remove(std::uint64_t key) {
  TicketLock& lock = lock_for(key);
  lock.lock();
  auto e = lookup(key);
  if (!e) {
    lock.unlock(FenceScope::none());
    return KvStatus::kNotFound;
  }
  write_slot(*e, KvSlot::make(0, e->counter, false));
  manager().fence(FenceScope::pair(e->node));
  broadcast({TrackerMsg::Op::kDelete, key, *e});
  {
    std::unique_lock g(index_mu_);
    index_.erase(key);
  }
  if (e->node == self()) {
    std::lock_guard g(slots_mu_);
    free_.push_back(e->slot);
  }
  lock.unlock(FenceScope::none());
  return KvStatus::kOk;
}

KvStatus KvStore::update(std::uint64_t key, std::uint64_t value) {
  TicketLock& lock = lock_for(key);
  lock.lock();
  auto e = lookup(key);
  if (!e) {
    lock.unlock(FenceScope::none());
    return KvStatus::kNotFound;
  }
  write_slot(*e, KvSlot::make(value, e->counter, true));
  lock.unlock(options_.skip_update_fence ? FenceScope::none() : FenceScope::pair(e->node));
  return KvStatus::kOk;
}

KvStore::Outcome KvStore::classify(const IndexEntry& e, const KvSlot& s) {
  if (!s.intact() && !s.never_used()) return Outcome::kRetry;
  if (s.counter != e.counter) {
    ++counter_mismatches_;
    return Outcome::kEmpty;
  }
  if (s.valid == 0) {
    ++invalid_seen_;
    return Outcome::kEmpty;
  }
  return Outcome::kValue;
}

std::optional<std::uint64_t> KvStore::read(std::uint64_t key) {
  ++reads_;
  Backoff backoff(manager().runtime(), 50, 2000);
  for (int attempt = 0;; ++attempt) {
    auto e = lookup(key);
    if (!e) return std::nullopt;
    KvSlot s = read_slot(*e);
    switch (classify(*e, s)) {
      case Outcome::kValue:
        return s.value;
      case Outcome::kEmpty:
        return std::nullopt;
      case Outcome::kRetry:
        ++read_retries_;
        if (attempt >= kSpinsBeforeBackoff) backoff.pause();
        break;
    }
  }
}

void KvStore::read_async(std::uint64_t key, PendingRead& out) {
  ++reads_;
  out.key = key;
  auto e = lookup(key);
  out.found = e.has_value();
  out.ack = {};
  if (!e) return;
  out.entry = *e;
  out.ack = manager().read(e->node, data_at(e->node), e->slot * KvSlot::kBytes, out.buf);
}

std::optional<std::uint64_t> KvStore::complete(PendingRead& p) {
  if (!p.found) return std::nullopt;
  p.ack.wait();
  KvSlot s = KvSlot::decode(p.buf);
  switch (classify(p.entry, s)) {
    case Outcome::kValue:
      return s.value;
    case Outcome::kEmpty:
      return std::nullopt;
    case Outcome::kRetry:
      break;
  }
  ++read_retries_;
  --reads_;
  return read(p.key);
}

void KvStore::apply(const TrackerMsg& msg) {
  {
    std::unique_lock g(index_mu_);
    if (msg.op == TrackerMsg::Op::kInsert) {
      index_[msg.key] = msg.entry;
    } else {
      auto it = index_.find(msg.key);
      if (it != index_.end() && it->second == msg.entry) index_.erase(it);
    }
  }
  if (msg.op == TrackerMsg::Op::kDelete && msg.entry.node == self()) {
    std::lock_guard g(slots_mu_);
    free_.push_back(msg.entry.slot);
  }
  ++applied_;
}

void KvStore::monitor_loop() {
  Runtime& rt = manager().runtime();
  Backoff backoff(rt, 100, 2000);
  while (!ready() && !stop_ && !rt.stopping()) backoff.pause();
  backoff.reset();
  while (!stop_ && !rt.stopping()) {
    bool any = false;
    for (NodeId n = 0; n < num_nodes(); ++n) {
      if (n == self()) continue;
      while (auto bytes = trackers_[n]->try_recv()) {
        apply(TrackerMsg::decode(*bytes));
        any = true;
      }
    }
    if (any) {
      backoff.reset();
    } else {
      backoff.pause();
    }
  }
  monitor_exited_ = true;
  rt.notify_all(monitor_q_);
}

std::uint64_t KvStore::lock_acquisitions() const {
  std::uint64_t total = 0;
  for (const auto& l : locks_) total += l->stats().acquisitions;
  return total;
}

KvStore::Stats KvStore::stats() const {
  return {reads_.load(), read_retries_.load(), counter_mismatches_.load(), invalid_seen_.load(),
          applied_.load()};
}

std::vector<std::pair<std::uint64_t, IndexEntry>> KvStore::index_snapshot() const {
  std::shared_lock lock(index_mu_);
  std::vector<std::pair<std::uint64_t, IndexEntry>> out(index_.begin(), index_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::size_t KvStore::free_slots() const {
  std::lock_guard g(slots_mu_);
  return free_.size();
}

}  // namespace loco

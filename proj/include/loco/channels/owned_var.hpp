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

// Single-writer multi-reader register. The owner holds the authoritative
// copy; every other participant holds a cached copy that the owner pushes
// into or that the reader refreshes with pull().
//
// Values of at most one word live in a single aligned word and are never
// torn. Larger values are laid out as value | seq | checksum and readers
// retry until the checksum matches.

#pragma once

#include <algorithm>
#include <array>
#include <mutex>
#include <type_traits>

#include "loco/manager.hpp"

namespace loco {

namespace detail {

inline constexpr std::size_t round_words(std::size_t n) {
  return (n + kWordSize - 1) / kWordSize * kWordSize;
}

}  // namespace detail

template <typename T>
  requires std::is_trivially_copyable_v<T>
class OwnedVar : public Channel {
 public:
  static constexpr bool kSmall = sizeof(T) <= kWordSize;
  static constexpr std::size_t kValueBytes = detail::round_words(sizeof(T));
  static constexpr std::size_t kRecordBytes = kSmall ? kWordSize : kValueBytes + 16;

  OwnedVar(Manager& m, const std::string& name, NodeId owner)
      : Channel(m, name), owner_(owner) {
    region_ = &add_region("data", kRecordBytes);
    activate();
  }
  OwnedVar(Channel& parent, const std::string& name, NodeId owner, bool symmetric = true)
      : Channel(parent, name), owner_(owner) {
    region_ = &add_region("data", kRecordBytes, symmetric);
  }

  NodeId owner() const { return owner_; }
  bool is_owner() const { return owner_ == self(); }
  std::string data_region() const { return region_name("data"); }

  void store_mine(const T& v) {
    if (!is_owner()) {
      throw UsageError("store on owned_var '" + name() + "' at non-owner node " +
                       std::to_string(self()));
    }
    std::lock_guard lock(mu_);
    mine_ = v;
    ++seq_;
    encode(v, seq_, record_);
    manager().memory().local_store(*region_, 0, record_);
  }

  // Writes the owner's current value into peer's cached copy in one verb.
  AckKey push(NodeId peer) {
    if (!is_owner()) throw UsageError("push on owned_var '" + name() + "' at non-owner");
    if (peer == self()) return {};
    std::array<std::byte, kRecordBytes> rec;
    {
      std::lock_guard lock(mu_);
      rec = record_;
    }
    return manager().write(peer, region_at(peer, "data"), 0, rec);
  }

  AckKey push_broadcast() {
    AckKey key;
    for (NodeId p : connected_peers()) key |= push(p);
    return key;
  }

  // Refreshes the local cache from the owner's copy and returns the value.
  T pull() {
    if (is_owner()) return load();
    std::array<std::byte, kRecordBytes> rec;
    Backoff backoff(manager().runtime());
    const RegionDesc& src = region_at(owner_, "data");
    while (true) {
      manager().read(owner_, src, 0, rec).wait();
      if constexpr (kSmall) {
        manager().memory().local_store_word(*region_, 0,
                                            load_as<std::uint64_t>(rec));
        return decode_value(rec);
      } else {
        if (valid(rec)) {
          std::lock_guard lock(mu_);
          std::uint64_t s = load_as<std::uint64_t>(rec, kValueBytes);
          if (s >= pulled_seq_) {
            pulled_seq_ = s;
            pulled_ = decode_value(rec);
          }
          return pulled_;
        }
        backoff.pause();
      }
    }
  }

  // Owner: the authoritative value. Others: the newest cached value.
  T load() const {
    if (is_owner()) {
      std::lock_guard lock(mu_);
      return mine_;
    }
    std::array<std::byte, kRecordBytes> rec;
    if constexpr (kSmall) {
      store_as(std::span(rec), 0,
               manager().memory().local_load_word(*region_, 0));
      return decode_value(rec);
    } else {
      Backoff backoff(manager().runtime());
      for (int spins = 0;; ++spins) {
        manager().memory().local_load(*region_, 0, rec);
        if (valid(rec)) break;
        ++torn_reads_;
        if (spins >= 64) {
          backoff.pause();
        } else {
          manager().runtime().yield();
        }
      }
      std::lock_guard lock(mu_);
      if (pulled_seq_ > load_as<std::uint64_t>(rec, kValueBytes)) return pulled_;
      return decode_value(rec);
    }
  }

  // Loads that saw a torn record and retried.
  std::uint64_t torn_reads() const { return torn_reads_; }

 private:
  static void encode(const T& v, std::uint64_t seq, std::array<std::byte, kRecordBytes>& out) {
    out.fill(std::byte{0});
    std::memcpy(out.data(), &v, sizeof(T));
    if constexpr (!kSmall) {
      store_as(std::span(out), kValueBytes, seq);
      std::uint64_t sum = fnv1a(std::span(out).first(kValueBytes + 8));
      store_as(std::span(out), kValueBytes + 8, sum);
    }
  }
  static T decode_value(const std::array<std::byte, kRecordBytes>& rec) {
    T v;
    std::memcpy(&v, rec.data(), sizeof(T));
    return v;
  }
  static bool valid(const std::array<std::byte, kRecordBytes>& rec) {
    if (std::all_of(rec.begin(), rec.end(), [](std::byte b) { return b == std::byte{0}; })) {
      return true;  // never written: the zero value
    }
    std::uint64_t sum = load_as<std::uint64_t>(rec, kValueBytes + 8);
    return sum == fnv1a(std::span(rec).first(kValueBytes + 8));
  }

  NodeId owner_;
  const RegionDesc* region_ = nullptr;
  mutable std::mutex mu_;
  T mine_{};
  std::uint64_t seq_ = 0;
  std::array<std::byte, kRecordBytes> record_{};
  T pulled_{};
  std::uint64_t pulled_seq_ = 0;
  mutable std::atomic<std::uint64_t> torn_reads_{0};
};

}  // namespace loco

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

#include "loco/channels/atomic_var.hpp"

namespace loco {

AtomicVar::AtomicVar(Manager& m, const std::string& name, NodeId host)
    : Channel(m, name), host_(host) {
  init();
  activate();
}

AtomicVar::AtomicVar(Channel& parent, const std::string& name, NodeId host)
    : Channel(parent, name), host_(host) {
  init();
}

void AtomicVar::init() {
  if (host_ >= num_nodes()) throw UsageError("atomic_var host outside the cluster");
  if (is_host()) local_ = &add_region("word", kWordSize, false);
}

void AtomicVar::expected_from(NodeId peer, std::vector<std::string>& out) const {
  Channel::expected_from(peer, out);
  if (peer == host_) out.push_back(region_name("word"));
}

const RegionDesc& AtomicVar::official() const {
  if (local_ != nullptr) return *local_;
  const RegionDesc* r = remote_.load(std::memory_order_acquire);
  if (r == nullptr) {
    r = &region_at(host_, "word");
    remote_.store(r, std::memory_order_release);
  }
  return *r;
}

std::uint64_t AtomicVar::fetch_add(std::uint64_t delta) {
  std::uint64_t prior = manager().fetch_add(host_, official(), 0, delta);
  cache_.store(prior + delta, std::memory_order_relaxed);
  return prior;
}

AckKey AtomicVar::fetch_add_async(std::uint64_t delta, std::uint64_t* prior) {
  return manager().fetch_add_async(host_, official(), 0, delta, prior);
}

std::uint64_t AtomicVar::compare_swap(std::uint64_t expected, std::uint64_t desired) {
  std::uint64_t prior = manager().compare_swap(host_, official(), 0, expected, desired);
  cache_.store(prior == expected ? desired : prior, std::memory_order_relaxed);
  return prior;
}

AckKey AtomicVar::store(std::uint64_t v) {
  cache_.store(v, std::memory_order_relaxed);
  if (is_host()) {
    manager().memory().local_store_word(*local_, 0, v);
    return {};
  }
  return manager().write(host_, official(), 0, as_bytes_of(v));
}

std::uint64_t AtomicVar::load(bool cached) {
  if (cached) return cache_.load(std::memory_order_relaxed);
  std::uint64_t v;
  if (is_host()) {
    v = manager().memory().local_load_word(*local_, 0);
  } else {
    std::byte buf[kWordSize];
    manager().read(host_, official(), 0, buf).wait();
    v = load_as<std::uint64_t>(buf);
  }
  cache_.store(v, std::memory_order_relaxed);
  return v;
}

}  // namespace loco

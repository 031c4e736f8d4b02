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

#include <atomic>
#include <cstdint>

#include "loco/manager.hpp"

namespace loco {

// A word with one official copy at its host. Read-modify-writes always go
// to the official copy; other nodes keep a cache refreshed only by an
// uncached load, a store, or the result of their own atomics.
class AtomicVar : public Channel {
 public:
  AtomicVar(Manager& m, const std::string& name, NodeId host);
  AtomicVar(Channel& parent, const std::string& name, NodeId host);

  NodeId host() const { return host_; }
  bool is_host() const { return host_ == self(); }

  std::uint64_t fetch_add(std::uint64_t delta);
  std::uint64_t compare_swap(std::uint64_t expected, std::uint64_t desired);
  AckKey fetch_add_async(std::uint64_t delta, std::uint64_t* prior);
  AckKey store(std::uint64_t v);
  std::uint64_t load(bool cached = false);

 protected:
  void expected_from(NodeId peer, std::vector<std::string>& out) const override;

 private:
  void init();
  const RegionDesc& official() const;

  NodeId host_;
  const RegionDesc* local_ = nullptr;
  mutable std::atomic<const RegionDesc*> remote_{nullptr};
  std::atomic<std::uint64_t> cache_{0};
};

}  // namespace loco

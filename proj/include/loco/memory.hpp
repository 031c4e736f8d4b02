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
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "loco/common.hpp"

namespace loco {

// A named, remotely accessible byte range owned by one node. `base` packs
// the arena page index (high 24 bits) and the byte offset within the page.
struct RegionDesc {
  NodeId owner = 0;
  std::string name;
  std::uint64_t base = 0;
  std::uint64_t length = 0;
  std::uint64_t key = 0;

  bool operator==(const RegionDesc&) const = default;
};

inline constexpr int kPageShift = 40;

// Pooled network memory of one node. Regions are carved out of large pages
// instead of being registered one by one; pages are allocated on demand and
// zero-filled. Every access goes through 64-bit atomic words, so aligned
// word accesses are single-copy atomic with respect to each other, whether
// they come from the local CPU or from remote verbs.
class NodeMemory {
 public:
  struct Config {
    std::size_t page_bytes = 64 * 1024;
    std::size_t max_bytes = std::size_t{1} << 30;
  };

  NodeMemory(NodeId owner, Config config);
  explicit NodeMemory(NodeId owner) : NodeMemory(owner, Config{}) {}

  NodeId owner() const { return owner_; }

  // Throws SetupError on a duplicate name or zero length, FabricError when
  // the arena is exhausted.
  RegionDesc register_region(const std::string& name, std::size_t length);
  std::optional<RegionDesc> find(const std::string& name) const;
  std::vector<RegionDesc> regions() const;
  std::size_t bytes_in_use() const;

  // Bounds-checked access within a region.
  void local_load(const RegionDesc& r, std::uint64_t offset,
                  std::span<std::byte> out) const;
  void local_store(const RegionDesc& r, std::uint64_t offset,
                   std::span<const std::byte> in);
  std::uint64_t local_load_word(const RegionDesc& r, std::uint64_t offset) const;
  void local_store_word(const RegionDesc& r, std::uint64_t offset,
                        std::uint64_t v);
  std::uint64_t local_fetch_add(const RegionDesc& r, std::uint64_t offset,
                                std::uint64_t delta);
  std::uint64_t local_compare_swap(const RegionDesc& r, std::uint64_t offset,
                                   std::uint64_t expected, std::uint64_t desired);

  // Unchecked access by packed address, used by fabrics after validation.
  void load(std::uint64_t addr, std::span<std::byte> out) const;
  void store(std::uint64_t addr, std::span<const std::byte> in);
  std::uint64_t fetch_add(std::uint64_t addr, std::uint64_t delta);
  std::uint64_t compare_swap(std::uint64_t addr, std::uint64_t expected,
                             std::uint64_t desired);

  // Resolves (name, offset, length) to an address; throws FabricError for an
  // unknown region or an out-of-bounds range.
  std::uint64_t resolve(const std::string& name, std::uint64_t offset,
                        std::uint64_t length) const;

 private:
  struct Page {
    std::size_t words = 0;
    std::unique_ptr<std::atomic<std::uint64_t>[]> data;
  };

  std::atomic<std::uint64_t>* word_at(std::uint64_t addr) const;
  static void check_bounds(const RegionDesc& r, std::uint64_t offset,
                           std::uint64_t length);

  NodeId owner_;
  Config config_;
  mutable std::shared_mutex mu_;
  std::vector<Page> pages_;  // reserved up front; never reallocated
  std::atomic<std::size_t> page_count_{0};
  std::size_t page_used_ = 0;
  std::size_t total_bytes_ = 0;
  std::map<std::string, RegionDesc, std::less<>> regions_;
  std::uint64_t next_key_;
};

}  // namespace loco

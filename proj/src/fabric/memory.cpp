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

#include "loco/memory.hpp"

#include <algorithm>
#include <mutex>

namespace loco {

namespace {

constexpr std::size_t kRegionAlign = 64;
constexpr std::uint64_t kOffsetMask = (std::uint64_t{1} << kPageShift) - 1;

std::size_t round_up(std::size_t v, std::size_t a) { return (v + a - 1) / a * a; }

}  // namespace

NodeMemory::NodeMemory(NodeId owner, Config config)
    : owner_(owner), config_(config), next_key_(mix64(owner + 1)) {
  if (config_.page_bytes == 0 || config_.page_bytes % kRegionAlign != 0) {
    throw SetupError("page size must be a positive multiple of 64");
  }
  pages_.resize(config_.max_bytes / config_.page_bytes + 64);
}

RegionDesc NodeMemory::register_region(const std::string& name,
                                       std::size_t length) {
  if (length == 0) throw SetupError("region '" + name + "' has zero length");
  std::unique_lock lock(mu_);
  if (regions_.contains(name)) {
    throw SetupError("duplicate region name '" + name + "'");
  }
  std::size_t need = round_up(length, kRegionAlign);
  std::size_t count = page_count_.load(std::memory_order_relaxed);
  bool fits = count > 0 && page_used_ + need <= pages_[count - 1].words * kWordSize;
  if (!fits) {
    std::size_t page_bytes = std::max(config_.page_bytes, need);
    if (total_bytes_ + page_bytes > config_.max_bytes || count == pages_.size()) {
      throw FabricError("network memory arena exhausted registering '" + name + "'");
    }
    Page& page = pages_[count];
    page.words = page_bytes / kWordSize;
    page.data = std::make_unique<std::atomic<std::uint64_t>[]>(page.words);
    total_bytes_ += page_bytes;
    page_used_ = 0;
    page_count_.store(count + 1, std::memory_order_release);
    count += 1;
  }
  RegionDesc desc;
  desc.owner = owner_;
  desc.name = name;
  desc.base = (static_cast<std::uint64_t>(count - 1) << kPageShift) | page_used_;
  desc.length = length;
  next_key_ = mix64(next_key_);
  desc.key = next_key_;
  page_used_ += need;
  regions_.emplace(name, desc);
  return desc;
}

std::optional<RegionDesc> NodeMemory::find(const std::string& name) const {
  std::shared_lock lock(mu_);
  auto it = regions_.find(name);
  if (it == regions_.end()) return std::nullopt;
  return it->second;
}

std::vector<RegionDesc> NodeMemory::regions() const {
  std::shared_lock lock(mu_);
  std::vector<RegionDesc> out;
  out.reserve(regions_.size());
  for (const auto& [_, r] : regions_) out.push_back(r);
  return out;
}

std::size_t NodeMemory::bytes_in_use() const {
  std::shared_lock lock(mu_);
  return total_bytes_;
}

std::uint64_t NodeMemory::resolve(const std::string& name, std::uint64_t offset,
                                  std::uint64_t length) const {
  std::shared_lock lock(mu_);
  auto it = regions_.find(name);
  if (it == regions_.end()) {
    throw FabricError("unknown region '" + name + "' at node " +
                      std::to_string(owner_));
  }
  check_bounds(it->second, offset, length);
  return it->second.base + offset;
}

void NodeMemory::check_bounds(const RegionDesc& r, std::uint64_t offset,
                              std::uint64_t length) {
  if (offset > r.length || length > r.length - offset) {
    throw FabricError("access [" + std::to_string(offset) + ", +" +
                      std::to_string(length) + ") out of bounds of region '" +
                      r.name + "' (" + std::to_string(r.length) + " bytes)");
  }
}

std::atomic<std::uint64_t>* NodeMemory::word_at(std::uint64_t addr) const {
  std::size_t page = addr >> kPageShift;
  std::size_t offset = addr & kOffsetMask;
  return &pages_[page].data[offset / kWordSize];
}

void NodeMemory::load(std::uint64_t addr, std::span<std::byte> out) const {
  std::size_t done = 0;
  while (done < out.size()) {
    std::uint64_t a = addr + done;
    std::size_t in_word = a % kWordSize;
    std::size_t n = std::min(kWordSize - in_word, out.size() - done);
    std::uint64_t w = word_at(a - in_word)->load(std::memory_order_acquire);
    std::memcpy(out.data() + done, reinterpret_cast<const std::byte*>(&w) + in_word, n);
    done += n;
  }
}

void NodeMemory::store(std::uint64_t addr, std::span<const std::byte> in) {
  std::size_t done = 0;
  while (done < in.size()) {
    std::uint64_t a = addr + done;
    std::size_t in_word = a % kWordSize;
    std::size_t n = std::min(kWordSize - in_word, in.size() - done);
    auto* word = word_at(a - in_word);
    if (n == kWordSize) {
      std::uint64_t w;
      std::memcpy(&w, in.data() + done, kWordSize);
      word->store(w, std::memory_order_release);
    } else {
      std::uint64_t old = word->load(std::memory_order_relaxed);
      std::uint64_t merged;
      do {
        merged = old;
        std::memcpy(reinterpret_cast<std::byte*>(&merged) + in_word, in.data() + done, n);
      } while (!word->compare_exchange_weak(old, merged, std::memory_order_acq_rel));
    }
    done += n;
  }
}

std::uint64_t NodeMemory::fetch_add(std::uint64_t addr, std::uint64_t delta) {
  return word_at(addr)->fetch_add(delta, std::memory_order_acq_rel);
}

std::uint64_t NodeMemory::compare_swap(std::uint64_t addr, std::uint64_t expected,
                                       std::uint64_t desired) {
  word_at(addr)->compare_exchange_strong(expected, desired,
                                         std::memory_order_acq_rel);
  return expected;
}

void NodeMemory::local_load(const RegionDesc& r, std::uint64_t offset,
                            std::span<std::byte> out) const {
  check_bounds(r, offset, out.size());
  load(r.base + offset, out);
}

void NodeMemory::local_store(const RegionDesc& r, std::uint64_t offset,
                             std::span<const std::byte> in) {
  check_bounds(r, offset, in.size());
  store(r.base + offset, in);
}

std::uint64_t NodeMemory::local_load_word(const RegionDesc& r,
                                          std::uint64_t offset) const {
  check_bounds(r, offset, kWordSize);
  std::uint64_t v;
  load(r.base + offset, std::as_writable_bytes(std::span(&v, 1)));
  return v;
}

void NodeMemory::local_store_word(const RegionDesc& r, std::uint64_t offset,
                                  std::uint64_t v) {
  check_bounds(r, offset, kWordSize);
  store(r.base + offset, as_bytes_of(v));
}

std::uint64_t NodeMemory::local_fetch_add(const RegionDesc& r,
                                          std::uint64_t offset,
                                          std::uint64_t delta) {
  check_bounds(r, offset, kWordSize);
  if ((r.base + offset) % kWordSize != 0) throw FabricError("misaligned atomic");
  return fetch_add(r.base + offset, delta);
}

std::uint64_t NodeMemory::local_compare_swap(const RegionDesc& r,
                                             std::uint64_t offset,
                                             std::uint64_t expected,
                                             std::uint64_t desired) {
  check_bounds(r, offset, kWordSize);
  if ((r.base + offset) % kWordSize != 0) throw FabricError("misaligned atomic");
  return compare_swap(r.base + offset, expected, desired);
}

}  // namespace loco

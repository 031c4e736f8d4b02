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

// Asynchronous completion tracking.
//
// Each application thread owns a window of op slots backed by a lock-free
// bitset: a bit is set while its operation is in flight. Only the owning
// thread sets bits and only the polling agent clears them. A slot's
// generation is bumped every time it is reused, so an AckKey that remembers
// (slot, generation) can never mistake a later operation for its own.

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "loco/common.hpp"
#include "loco/fabric.hpp"
#include "loco/runtime.hpp"

namespace loco {

inline constexpr std::size_t kDefaultWindow = 3;
inline constexpr std::size_t kMaxWindow = 1024;

struct OpId {
  std::uint16_t thread = 0;
  std::uint16_t slot = 0;
  std::uint32_t generation = 0;

  std::uint64_t pack() const {
    return (std::uint64_t{thread} << 48) | (std::uint64_t{slot} << 32) | generation;
  }
  static OpId unpack(std::uint64_t v) {
    return OpId{static_cast<std::uint16_t>(v >> 48),
                static_cast<std::uint16_t>(v >> 32),
                static_cast<std::uint32_t>(v)};
  }
};

// Where the polling agent deposits a verb's result before clearing its bit.
struct ResultSink {
  std::span<std::byte> data;
  std::uint64_t* prior = nullptr;
};

// Raised by AckKey::wait when a tracked verb completed with an error.
class VerbError : public Error {
 public:
  VerbError(std::string what, std::vector<OpId> failed)
      : Error(std::move(what)), failed_(std::move(failed)) {}
  const std::vector<OpId>& failed() const { return failed_; }

 private:
  std::vector<OpId> failed_;
};

class CompletionTracker;

class ThreadWindow {
 public:
  ThreadWindow(std::uint16_t thread, std::size_t window);

  std::uint16_t thread() const { return thread_; }
  std::size_t window() const { return window_; }
  std::size_t in_flight() const { return in_flight_.load(std::memory_order_acquire); }
  bool pending(std::uint16_t slot) const;
  std::uint32_t generation(std::uint16_t slot) const;

  // Owner thread only. Returns nullopt when the window is full.
  std::optional<OpId> try_acquire(ResultSink sink);

 private:
  friend class CompletionTracker;
  struct Slot {
    std::atomic<std::uint32_t> generation{0};
    ResultSink sink;
  };
  struct Failure {
    OpId op;
    std::string error;
  };

  std::uint16_t thread_;
  std::size_t window_;
  std::vector<std::atomic<std::uint64_t>> bits_;
  std::unique_ptr<Slot[]> slots_;
  std::atomic<std::size_t> in_flight_{0};
  std::size_t hint_ = 0;
  mutable std::mutex failures_mu_;
  std::vector<Failure> failures_;
};

// Handle over a set of in-flight verbs of one thread.
class AckKey {
 public:
  AckKey() = default;

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  // True iff every tracked verb has completed. Performs no writes.
  bool query() const;
  // Blocks until query() holds. Throws VerbError if a tracked verb failed.
  void wait() const;

  // Completes iff both complete. Keys of different threads cannot be merged.
  AckKey& operator|=(const AckKey& other);
  friend AckKey operator|(AckKey a, const AckKey& b) { return a |= b; }

  const ThreadWindow* owner() const { return window_; }

 private:
  friend class CompletionTracker;
  struct Entry {
    std::uint16_t slot;
    std::uint32_t generation;
  };
  AckKey(CompletionTracker* tracker, const ThreadWindow* window, OpId op)
      : tracker_(tracker), window_(window), entries_{Entry{op.slot, op.generation}} {}

  CompletionTracker* tracker_ = nullptr;
  const ThreadWindow* window_ = nullptr;
  std::vector<Entry> entries_;  // sorted by slot, one entry per slot
};

// Node-wide completion state, fed by the single polling agent.
class CompletionTracker {
 public:
  explicit CompletionTracker(Runtime& rt);

  ThreadWindow& add_thread(std::uint16_t thread, std::size_t window);
  ThreadWindow* window(std::uint16_t thread) const;

  // Blocks while the window is full (backpressure) and returns a fresh slot.
  OpId acquire(ThreadWindow& w, ResultSink sink = {});
  AckKey key_for(const ThreadWindow& w, OpId op) { return AckKey(this, &w, op); }

  // Releases a slot whose verb was never posted. Owner thread only.
  void cancel(ThreadWindow& w, OpId op);

  // Polling agent only: deposit the result, record failures, clear the bit.
  void complete(WorkCompletion& wc);
  void signal_progress() { rt_.notify_all(progress_); }

  WaitQueue& progress_signal() { return progress_; }
  Runtime& runtime() { return rt_; }
  std::uint64_t completions() const { return completions_.load(); }

  // Removes and returns failures recorded for the given entries.
  std::vector<std::pair<OpId, std::string>> take_failures(
      const ThreadWindow& w, std::span<const OpId> ops);

 private:
  static constexpr std::size_t kMaxThreads = 256;
  Runtime& rt_;
  WaitQueue progress_;
  std::mutex mu_;
  std::vector<std::unique_ptr<ThreadWindow>> owned_;
  std::atomic<ThreadWindow*> windows_[kMaxThreads] = {};
  std::atomic<std::uint64_t> completions_{0};
};

}  // namespace loco

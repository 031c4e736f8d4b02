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
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace loco::harness {

enum class OpType : std::uint8_t { kInsert, kRemove, kUpdate, kRead, kPush, kPop };

const char* to_string(OpType op);

// Results share one small code space across map and queue operations.
enum class OpResult : std::uint8_t {
  kOk,
  kAlreadyExists,
  kNotFound,
  kCapacityExhausted,
  kEmpty,
  kFull,
};

const char* to_string(OpResult r);

struct HistoryRecord {
  OpType op = OpType::kRead;
  std::uint64_t key = 0;
  std::uint64_t value = 0;
  std::uint64_t invoke = 0;
  std::uint64_t response = 0;
  std::uint32_t node = 0;
  std::uint32_t thread = 0;
  OpResult result = OpResult::kOk;
  // Reads: the value returned, if any. Pops: the value dequeued.
  std::optional<std::uint64_t> out;

  std::string describe() const;
};

// Per-thread append-only logs stamped from one logical clock, so that one
// operation's response preceding another's invocation is visible as
// response < invoke.
class History {
 public:
  class Log {
   public:
    std::size_t begin(OpType op, std::uint64_t key, std::uint64_t value = 0);
    void end(std::size_t token, OpResult result, std::optional<std::uint64_t> out = {});

   private:
    friend class History;
    Log(History& h, std::uint32_t node, std::uint32_t thread)
        : history_(h), node_(node), thread_(thread) {}
    History& history_;
    std::uint32_t node_;
    std::uint32_t thread_;
    std::vector<HistoryRecord> records_;
  };

  Log& log(std::uint32_t node, std::uint32_t thread);
  // All completed records ordered by invocation.
  std::vector<HistoryRecord> merged() const;

 private:
  std::uint64_t tick() { return ++clock_; }

  std::atomic<std::uint64_t> clock_{0};
  mutable std::mutex mu_;
  std::deque<Log> logs_;
};

}  // namespace loco::harness

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

#include "loco/harness/history.hpp"

#include <algorithm>

#include "loco/common.hpp"

namespace loco::harness {

const char* to_string(OpType op) {
  switch (op) {
    case OpType::kInsert: return "insert";
    case OpType::kRemove: return "remove";
    case OpType::kUpdate: return "update";
    case OpType::kRead: return "read";
    case OpType::kPush: return "push";
    case OpType::kPop: return "pop";
  }
  return "?";
}

const char* to_string(OpResult r) {
  switch (r) {
    case OpResult::kOk: return "Ok";
    case OpResult::kAlreadyExists: return "AlreadyExists";
    case OpResult::kNotFound: return "NotFound";
    case OpResult::kCapacityExhausted: return "CapacityExhausted";
    case OpResult::kEmpty: return "Empty";
    case OpResult::kFull: return "Full";
  }
  return "?";
}

std::string HistoryRecord::describe() const {
  std::string s = "[" + std::to_string(invoke) + "," + std::to_string(response) + "] n" +
                  std::to_string(node) + "t" + std::to_string(thread) + " " + to_string(op) + "(";
  if (op == OpType::kPush) {
    s += std::to_string(value);
  } else if (op != OpType::kPop) {
    s += std::to_string(key);
  }
  if (op == OpType::kInsert || op == OpType::kUpdate) s += ", " + std::to_string(value);
  s += ") -> ";
  if (op == OpType::kRead || op == OpType::kPop) {
    s += out ? std::to_string(*out) : std::string(to_string(result));
  } else {
    s += to_string(result);
  }
  return s;
}

std::size_t History::Log::begin(OpType op, std::uint64_t key, std::uint64_t value) {
  HistoryRecord r;
  r.op = op;
  r.key = key;
  r.value = value;
  r.node = node_;
  r.thread = thread_;
  r.invoke = history_.tick();
  records_.push_back(r);
  return records_.size() - 1;
}

void History::Log::end(std::size_t token, OpResult result, std::optional<std::uint64_t> out) {
  HistoryRecord& r = records_.at(token);
  if (r.response != 0) throw UsageError("history record completed twice");
  r.result = result;
  r.out = out;
  r.response = history_.tick();
}

History::Log& History::log(std::uint32_t node, std::uint32_t thread) {
  std::lock_guard lock(mu_);
  return logs_.emplace_back(Log(*this, node, thread));
}

std::vector<HistoryRecord> History::merged() const {
  std::lock_guard lock(mu_);
  std::vector<HistoryRecord> out;
  for (const auto& l : logs_) {
    for (const auto& r : l.records_) {
      if (r.response != 0) out.push_back(r);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const HistoryRecord& a, const HistoryRecord& b) { return a.invoke < b.invoke; });
  return out;
}

}  // namespace loco::harness

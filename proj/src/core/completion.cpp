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

#include "loco/completion.hpp"

#include <algorithm>
#include <cstring>

namespace loco {

ThreadWindow::ThreadWindow(std::uint16_t thread, std::size_t window)
    : thread_(thread), window_(window), bits_((window + 63) / 64) {
  if (window == 0 || window > kMaxWindow) {
    throw UsageError("window size must be in [1, " + std::to_string(kMaxWindow) + "]");
  }
  slots_ = std::make_unique<Slot[]>(window);
}

bool ThreadWindow::pending(std::uint16_t slot) const {
  return (bits_[slot / 64].load(std::memory_order_acquire) >> (slot % 64)) & 1;
}

std::uint32_t ThreadWindow::generation(std::uint16_t slot) const {
  return slots_[slot].generation.load(std::memory_order_acquire);
}

std::optional<OpId> ThreadWindow::try_acquire(ResultSink sink) {
  if (in_flight_.load(std::memory_order_acquire) >= window_) return std::nullopt;
  for (std::size_t probe = 0; probe < window_; ++probe) {
    std::size_t s = (hint_ + probe) % window_;
    if (pending(static_cast<std::uint16_t>(s))) continue;
    hint_ = s + 1;
    Slot& slot = slots_[s];
    std::uint32_t gen = slot.generation.load(std::memory_order_relaxed) + 1;
    slot.sink = sink;
    slot.generation.store(gen, std::memory_order_release);
    in_flight_.fetch_add(1, std::memory_order_acq_rel);
    bits_[s / 64].fetch_or(std::uint64_t{1} << (s % 64), std::memory_order_release);
    return OpId{thread_, static_cast<std::uint16_t>(s), gen};
  }
  return std::nullopt;
}

bool AckKey::query() const {
  for (const Entry& e : entries_) {
    // A bumped generation means the slot was released and reacquired, which
    // only happens after this entry's verb completed.
    if (window_->generation(e.slot) == e.generation && window_->pending(e.slot)) {
      return false;
    }
  }
  return true;
}

void AckKey::wait() const {
  if (entries_.empty()) return;
  tracker_->runtime().wait(tracker_->progress_signal(), [this] { return query(); });
  std::vector<OpId> ops;
  ops.reserve(entries_.size());
  for (const Entry& e : entries_) {
    ops.push_back(OpId{window_->thread(), e.slot, e.generation});
  }
  auto failed = tracker_->take_failures(*window_, ops);
  if (!failed.empty()) {
    std::vector<OpId> ids;
    std::string msg = "verb failed:";
    for (auto& [op, err] : failed) {
      ids.push_back(op);
      msg += " [slot " + std::to_string(op.slot) + "] " + err;
    }
    throw VerbError(msg, std::move(ids));
  }
}

AckKey& AckKey::operator|=(const AckKey& other) {
  if (other.entries_.empty()) return *this;
  if (entries_.empty()) return *this = other;
  if (window_ != other.window_) {
    throw UsageError("cannot union ack keys of different threads");
  }
  std::vector<Entry> merged;
  merged.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->slot < b->slot)) {
      merged.push_back(*a++);
    } else if (a == entries_.end() || b->slot < a->slot) {
      merged.push_back(*b++);
    } else {
      // Same slot: the older generation has necessarily completed.
      merged.push_back(a->generation >= b->generation ? *a : *b);
      ++a;
      ++b;
    }
  }
  entries_ = std::move(merged);
  return *this;
}

CompletionTracker::CompletionTracker(Runtime& rt) : rt_(rt) {}

ThreadWindow& CompletionTracker::add_thread(std::uint16_t thread, std::size_t window) {
  if (thread >= kMaxThreads) throw UsageError("too many threads on one node");
  std::lock_guard lock(mu_);
  if (windows_[thread].load() != nullptr) throw UsageError("thread registered twice");
  owned_.push_back(std::make_unique<ThreadWindow>(thread, window));
  windows_[thread].store(owned_.back().get(), std::memory_order_release);
  return *owned_.back();
}

ThreadWindow* CompletionTracker::window(std::uint16_t thread) const {
  if (thread >= kMaxThreads) return nullptr;
  return windows_[thread].load(std::memory_order_acquire);
}

OpId CompletionTracker::acquire(ThreadWindow& w, ResultSink sink) {
  while (true) {
    if (auto op = w.try_acquire(sink)) return *op;
    rt_.wait(progress_, [&w] { return w.in_flight() < w.window(); });
  }
}

void CompletionTracker::complete(WorkCompletion& wc) {
  OpId op = OpId::unpack(wc.op_id);
  ThreadWindow* w = window(op.thread);
  if (w == nullptr || op.slot >= w->window()) {
    throw Error("completion for unknown op slot");
  }
  ThreadWindow::Slot& slot = w->slots_[op.slot];
  if (slot.generation.load(std::memory_order_acquire) != op.generation ||
      !w->pending(op.slot)) {
    throw Error("duplicate or stale completion for slot " + std::to_string(op.slot));
  }
  if (wc.status == CompletionStatus::kOk) {
    if (!slot.sink.data.empty()) {
      std::size_t n = std::min(slot.sink.data.size(), wc.data.size());
      std::memcpy(slot.sink.data.data(), wc.data.data(), n);
    }
    if (slot.sink.prior != nullptr) *slot.sink.prior = wc.prior;
  } else {
    std::lock_guard lock(w->failures_mu_);
    w->failures_.push_back({op, wc.error});
  }
  slot.sink = {};
  w->bits_[op.slot / 64].fetch_and(~(std::uint64_t{1} << (op.slot % 64)),
                                   std::memory_order_release);
  w->in_flight_.fetch_sub(1, std::memory_order_acq_rel);
  completions_.fetch_add(1, std::memory_order_relaxed);
}

void CompletionTracker::cancel(ThreadWindow& w, OpId op) {
  w.slots_[op.slot].sink = {};
  w.bits_[op.slot / 64].fetch_and(~(std::uint64_t{1} << (op.slot % 64)),
                                  std::memory_order_release);
  w.in_flight_.fetch_sub(1, std::memory_order_acq_rel);
  signal_progress();
}

std::vector<std::pair<OpId, std::string>> CompletionTracker::take_failures(
    const ThreadWindow& w, std::span<const OpId> ops) {
  auto& tw = const_cast<ThreadWindow&>(w);
  std::lock_guard lock(tw.failures_mu_);
  std::vector<std::pair<OpId, std::string>> out;
  if (tw.failures_.empty()) return out;
  auto matches = [&](const ThreadWindow::Failure& f) {
    return std::any_of(ops.begin(), ops.end(), [&](const OpId& o) {
      return o.slot == f.op.slot && o.generation == f.op.generation;
    });
  };
  for (auto it = tw.failures_.begin(); it != tw.failures_.end();) {
    if (matches(*it)) {
      out.emplace_back(it->op, it->error);
      it = tw.failures_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

}  // namespace loco

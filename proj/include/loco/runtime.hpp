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

// Execution services shared by every layer: clock, task spawning, parking,
// and per-task storage. Two implementations exist: SimRuntime runs all tasks
// as fibers under a seeded discrete-event scheduler, OsRuntime maps tasks to
// std::threads. Library code must only block through this interface.

#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace loco {

using TimeNs = std::int64_t;
inline constexpr TimeNs kForever = std::numeric_limits<TimeNs>::max();

// Per-task slot used by Manager to find the calling thread's state.
// Per-task bindings from an owner (a manager) to that owner's state for the
// task. A task touching several nodes holds one binding per node.
struct TaskLocal {
  std::vector<std::pair<const void*, void*>> bindings;

  void* find(const void* owner) const {
    for (const auto& [o, v] : bindings) {
      if (o == owner) return v;
    }
    return nullptr;
  }
};

// A place to park tasks until notified. Fields are used by whichever runtime
// owns the waiting task.
struct WaitQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<void*> parked;
};

enum class TaskKind { kWorker, kDaemon };

class Runtime {
 public:
  virtual ~Runtime() = default;

  virtual TimeNs now() const = 0;
  virtual void yield() = 0;
  virtual void sleep_for(TimeNs ns) = 0;
  void sleep_until(TimeNs t) {
    TimeNs n = now();
    if (t > n) sleep_for(t - n);
  }

  // Blocks until ready() holds or the deadline passes. Returns ready().
  // Notifiers must change the predicate before calling notify_all.
  virtual bool wait(WaitQueue& q, const std::function<bool()>& ready,
                    TimeNs deadline = kForever) = 0;
  virtual void notify_all(WaitQueue& q) = 0;

  virtual TaskLocal& task_local() = 0;
  virtual void spawn(std::string name, std::function<void()> body,
                     TaskKind kind = TaskKind::kWorker) = 0;

  // Set once workers are done; daemon loops must exit when they see it.
  virtual bool stopping() const = 0;
  virtual bool deterministic() const = 0;
};

// Exponential pause for spin loops.
class Backoff {
 public:
  explicit Backoff(Runtime& rt, TimeNs initial = 50, TimeNs cap = 2000)
      : rt_(rt), initial_(initial), cur_(initial), cap_(cap) {}
  void pause() {
    rt_.sleep_for(cur_);
    cur_ = std::min(cur_ * 2, cap_);
  }
  void reset() { cur_ = initial_; }

 private:
  Runtime& rt_;
  TimeNs initial_;
  TimeNs cur_;
  TimeNs cap_;
};

// Mutex that blocks through the runtime, so it may be held across operations
// that wait (posting verbs, waiting for completions).
class SpinGate {
 public:
  explicit SpinGate(Runtime& rt) : rt_(&rt) {}
  SpinGate(const SpinGate&) = delete;
  SpinGate& operator=(const SpinGate&) = delete;

  void lock() {
    Backoff backoff(*rt_, 20, 1000);
    while (locked_.exchange(true, std::memory_order_acquire)) backoff.pause();
  }
  bool try_lock() { return !locked_.exchange(true, std::memory_order_acquire); }
  void unlock() { locked_.store(false, std::memory_order_release); }
  bool is_locked() const { return locked_.load(std::memory_order_relaxed); }

 private:
  Runtime* rt_;
  std::atomic<bool> locked_{false};
};

}  // namespace loco

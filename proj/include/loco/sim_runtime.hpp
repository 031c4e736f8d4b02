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

#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "loco/common.hpp"
#include "loco/runtime.hpp"

namespace loco {

class SimDeadlock : public Error {
 public:
  using Error::Error;
};

// Deterministic discrete-event runtime. Every task is a fiber; exactly one
// fiber or event callback runs at a time, chosen by simulated time with ties
// broken by insertion order. All randomness comes from one seeded engine, so
// a seed replays bit-identically.
class SimRuntime final : public Runtime {
 public:
  struct Config {
    std::uint64_t seed = 1;
    TimeNs cpu_step_ns = 20;       // cost of yield()
    TimeNs jitter_ns = 30;         // uniform extra delay on every resume
    std::size_t stack_bytes = 256 * 1024;
    TimeNs time_limit_ns = kForever;  // simulated-time watchdog
  };

  explicit SimRuntime(Config config);
  SimRuntime() : SimRuntime(Config{}) {}
  ~SimRuntime() override;

  TimeNs now() const override { return now_; }
  void yield() override;
  void sleep_for(TimeNs ns) override;
  bool wait(WaitQueue& q, const std::function<bool()>& ready,
            TimeNs deadline = kForever) override;
  void notify_all(WaitQueue& q) override;
  TaskLocal& task_local() override;
  void spawn(std::string name, std::function<void()> body,
             TaskKind kind = TaskKind::kWorker) override;
  bool stopping() const override { return stopping_; }
  bool deterministic() const override { return true; }

  // Runs until every worker task has finished, then stops daemons. Rethrows
  // the first exception escaping any task.
  void run();

  // Destroys every task, unwinding unfinished fibers. Call before tearing
  // down objects that suspended tasks still reference.
  void discard_tasks();

  // Event callbacks run on the scheduler, never inside a task; they must not
  // block.
  void schedule_at(TimeNs t, std::function<void()> fn);

  std::mt19937_64& rng() { return rng_; }
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);  // inclusive
  double uniform01();
  std::uint64_t events_processed() const { return events_; }
  const Config& config() const { return config_; }
  bool in_task() const { return current_ != nullptr; }

 private:
  struct Task;
  struct Event {
    TimeNs time;
    std::uint64_t seq;
    Task* task;
    std::uint64_t wake_gen;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void schedule_resume(Task* t, TimeNs at);
  void switch_to_scheduler();
  void resume(Task* t);
  Task* current_checked(const char* what);

  Config config_;
  std::mt19937_64 rng_;
  TimeNs now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t events_ = 0;
  std::size_t live_tasks_ = 0;
  std::size_t live_workers_ = 0;
  bool stopping_ = false;
  bool running_ = false;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<std::unique_ptr<Task>> tasks_;
  Task* current_ = nullptr;
  TaskLocal main_local_;
  std::exception_ptr failure_;
};

}  // namespace loco

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
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "loco/runtime.hpp"

namespace loco {

// Tasks are std::threads and time is the steady clock.
class OsRuntime final : public Runtime {
 public:
  OsRuntime();
  ~OsRuntime() override;

  TimeNs now() const override;
  void yield() override;
  void sleep_for(TimeNs ns) override;
  bool wait(WaitQueue& q, const std::function<bool()>& ready,
            TimeNs deadline = kForever) override;
  void notify_all(WaitQueue& q) override;
  TaskLocal& task_local() override;
  void spawn(std::string name, std::function<void()> body,
             TaskKind kind = TaskKind::kWorker) override;
  bool stopping() const override { return stopping_.load(); }
  bool deterministic() const override { return false; }

  // Joins worker threads; rethrows the first exception escaping one.
  void join_workers();
  // Sets stopping() and joins daemons.
  void shutdown();

 private:
  struct Thread {
    std::thread thread;
    TaskKind kind;
  };
  TimeNs epoch_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<Thread> threads_;
  std::exception_ptr failure_;
};

}  // namespace loco

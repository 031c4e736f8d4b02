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

#include "loco/os_runtime.hpp"

#include <chrono>

namespace loco {

namespace {

TimeNs steady_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

thread_local TaskLocal tls_local;

}  // namespace

OsRuntime::OsRuntime() : epoch_(steady_ns()) {}

OsRuntime::~OsRuntime() {
  stopping_ = true;
  for (auto& t : threads_) {
    if (t.thread.joinable()) t.thread.join();
  }
}

TimeNs OsRuntime::now() const { return steady_ns() - epoch_; }

void OsRuntime::yield() { std::this_thread::yield(); }

void OsRuntime::sleep_for(TimeNs ns) {
  // Short pauses spin through the scheduler; sleeps have ~50us granularity.
  if (ns < 20'000) {
    std::this_thread::yield();
  } else {
    std::this_thread::sleep_for(std::chrono::nanoseconds(ns));
  }
}

bool OsRuntime::wait(WaitQueue& q, const std::function<bool()>& ready,
                     TimeNs deadline) {
  std::unique_lock lock(q.mu);
  while (!ready()) {
    if (stopping_) return ready();
    TimeNs n = now();
    if (n >= deadline) return false;
    TimeNs slice = std::min<TimeNs>(deadline - n, 1'000'000);
    q.cv.wait_for(lock, std::chrono::nanoseconds(slice));
  }
  return true;
}

void OsRuntime::notify_all(WaitQueue& q) {
  { std::lock_guard lock(q.mu); }
  q.cv.notify_all();
}

TaskLocal& OsRuntime::task_local() { return tls_local; }

void OsRuntime::spawn(std::string name, std::function<void()> body,
                      TaskKind kind) {
  std::lock_guard lock(mu_);
  threads_.push_back(Thread{
      std::thread([this, body = std::move(body)] {
        try {
          body();
        } catch (...) {
          std::lock_guard l(mu_);
          if (!failure_) failure_ = std::current_exception();
        }
      }),
      kind});
  (void)name;
}

void OsRuntime::join_workers() {
  while (true) {
    std::thread t;
    {
      std::lock_guard lock(mu_);
      for (auto& th : threads_) {
        if (th.kind == TaskKind::kWorker && th.thread.joinable()) {
          t = std::move(th.thread);
          break;
        }
      }
    }
    if (!t.joinable()) break;
    t.join();
  }
  std::lock_guard lock(mu_);
  if (failure_) {
    auto f = failure_;
    failure_ = nullptr;
    std::rethrow_exception(f);
  }
}

void OsRuntime::shutdown() {
  stopping_ = true;
  std::vector<std::thread> daemons;
  {
    std::lock_guard lock(mu_);
    for (auto& th : threads_) {
      if (th.thread.joinable()) daemons.push_back(std::move(th.thread));
    }
  }
  for (auto& t : daemons) t.join();
}

}  // namespace loco

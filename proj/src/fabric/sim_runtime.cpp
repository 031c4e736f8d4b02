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

#include "loco/sim_runtime.hpp"

#include <algorithm>
#include <boost/context/fiber.hpp>
#include <boost/context/fixedsize_stack.hpp>
#include <sstream>

namespace loco {

namespace ctx = boost::context;

struct SimRuntime::Task {
  std::string name;
  TaskKind kind;
  std::function<void()> body;
  ctx::fiber fiber;      // the task's own context while suspended
  ctx::fiber scheduler;  // where to return when the task suspends
  TaskLocal local;
  std::uint64_t wake_gen = 0;
  bool started = false;
  bool done = false;
  bool parked = false;
  WaitQueue* parked_on = nullptr;
};

SimRuntime::SimRuntime(Config config) : config_(config), rng_(config.seed) {}

SimRuntime::~SimRuntime() { discard_tasks(); }

void SimRuntime::discard_tasks() {
  // Unfinished fibers are unwound by the fiber destructor.
  current_ = nullptr;
  while (!queue_.empty()) queue_.pop();
  tasks_.clear();
}

std::uint64_t SimRuntime::uniform(std::uint64_t lo, std::uint64_t hi) {
  if (hi <= lo) return lo;
  return lo + rng_() % (hi - lo + 1);
}

double SimRuntime::uniform01() {
  return static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0);
}

SimRuntime::Task* SimRuntime::current_checked(const char* what) {
  if (current_ == nullptr) {
    throw UsageError(std::string("SimRuntime::") + what +
                     " called outside a simulated task");
  }
  return current_;
}

void SimRuntime::schedule_at(TimeNs t, std::function<void()> fn) {
  queue_.push(Event{std::max(t, now_), seq_++, nullptr, 0, std::move(fn)});
}

void SimRuntime::schedule_resume(Task* t, TimeNs at) {
  queue_.push(Event{std::max(at, now_), seq_++, t, t->wake_gen, {}});
}

void SimRuntime::spawn(std::string name, std::function<void()> body,
                       TaskKind kind) {
  auto task = std::make_unique<Task>();
  task->name = std::move(name);
  task->kind = kind;
  task->body = std::move(body);
  Task* raw = task.get();
  task->fiber = ctx::fiber(
      std::allocator_arg, ctx::fixedsize_stack(config_.stack_bytes),
      [this, raw](ctx::fiber&& sched) {
        raw->scheduler = std::move(sched);
        try {
          raw->body();
        } catch (const ctx::detail::forced_unwind&) {
          throw;
        } catch (...) {
          if (!failure_) failure_ = std::current_exception();
        }
        raw->done = true;
        --live_tasks_;
        if (raw->kind == TaskKind::kWorker) --live_workers_;
        return std::move(raw->scheduler);
      });
  tasks_.push_back(std::move(task));
  ++live_tasks_;
  if (kind == TaskKind::kWorker) ++live_workers_;
  schedule_resume(raw, now_ + static_cast<TimeNs>(uniform(0, config_.jitter_ns)));
}

void SimRuntime::switch_to_scheduler() {
  Task* t = current_;
  t->scheduler = std::move(t->scheduler).resume();
}

void SimRuntime::resume(Task* t) {
  current_ = t;
  t->started = true;
  t->fiber = std::move(t->fiber).resume();
  current_ = nullptr;
}

void SimRuntime::yield() { sleep_for(config_.cpu_step_ns); }

void SimRuntime::sleep_for(TimeNs ns) {
  Task* t = current_checked("sleep_for");
  if (now_ > config_.time_limit_ns) {
    throw TimeoutError("simulated time limit exceeded in task " + t->name);
  }
  TimeNs jitter = static_cast<TimeNs>(uniform(0, config_.jitter_ns));
  schedule_resume(t, now_ + std::max<TimeNs>(ns, 0) + jitter);
  switch_to_scheduler();
}

bool SimRuntime::wait(WaitQueue& q, const std::function<bool()>& ready,
                      TimeNs deadline) {
  Task* t = current_checked("wait");
  while (!ready()) {
    if (now_ >= deadline) return false;
    if (stopping_ && t->kind == TaskKind::kDaemon) return ready();
    if (now_ > config_.time_limit_ns) {
      throw TimeoutError("simulated time limit exceeded in task " + t->name);
    }
    t->parked = true;
    t->parked_on = &q;
    q.parked.push_back(t);
    if (deadline != kForever) schedule_resume(t, deadline);
    switch_to_scheduler();
    t->parked = false;
    if (t->parked_on != nullptr) {
      auto& v = t->parked_on->parked;
      v.erase(std::remove(v.begin(), v.end(), t), v.end());
      t->parked_on = nullptr;
    }
  }
  return true;
}

void SimRuntime::notify_all(WaitQueue& q) {
  std::vector<void*> woken;
  woken.swap(q.parked);
  for (void* p : woken) {
    auto* t = static_cast<Task*>(p);
    t->parked_on = nullptr;
    TimeNs jitter = static_cast<TimeNs>(uniform(0, config_.jitter_ns));
    schedule_resume(t, now_ + config_.cpu_step_ns + jitter);
  }
}

TaskLocal& SimRuntime::task_local() {
  return current_ != nullptr ? current_->local : main_local_;
}

void SimRuntime::run() {
  if (running_) throw UsageError("SimRuntime::run is not reentrant");
  running_ = true;
  auto workers_done = [this] { return live_workers_ == 0; };
  auto all_done = [this] { return live_tasks_ == 0; };
  while (true) {
    if (failure_) break;
    if (!stopping_ && workers_done()) {
      stopping_ = true;
      // Wake parked daemons so they observe stopping().
      for (auto& t : tasks_) {
        if (!t->done && t->parked) {
          if (t->parked_on != nullptr) {
            auto& v = t->parked_on->parked;
            v.erase(std::remove(v.begin(), v.end(), t.get()), v.end());
            t->parked_on = nullptr;
          }
          schedule_resume(t.get(), now_ + config_.cpu_step_ns);
        }
      }
    }
    if (stopping_ && all_done()) break;
    if (queue_.empty()) {
      std::ostringstream os;
      os << "simulation deadlock at t=" << now_ << "ns; blocked tasks:";
      for (auto& t : tasks_) {
        if (!t->done) os << ' ' << t->name;
      }
      running_ = false;
      throw SimDeadlock(os.str());
    }
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ++events_;
    if (ev.task == nullptr) {
      ev.fn();
      continue;
    }
    Task* t = ev.task;
    if (t->done || ev.wake_gen != t->wake_gen) continue;
    ++t->wake_gen;
    resume(t);
  }
  running_ = false;
  if (failure_) {
    auto f = failure_;
    failure_ = nullptr;
    std::rethrow_exception(f);
  }
}

}  // namespace loco

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

#include "loco/harness/checker.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "loco/common.hpp"

namespace loco::harness {

namespace {

// Depth-first search for a sequential witness. An operation may be placed
// next only if no pending operation responded before it was invoked.
// Visited (placed-set, state) pairs are remembered.
template <typename State, typename Step>
class Search {
 public:
  struct Exhausted {};

  Search(const std::vector<HistoryRecord>& ops, std::vector<std::uint64_t> rank,
         std::vector<std::uint64_t> prereq, Step step, std::uint64_t max_states)
      : ops_(ops),
        rank_(std::move(rank)),
        prereq_(std::move(prereq)),
        step_(step),
        max_states_(max_states) {}

  // Throws Exhausted once more than max_states states have been visited.
  bool run(State initial) {
    full_ = ops_.size() == 64 ? ~0ULL : (1ULL << ops_.size()) - 1;
    return dfs(0, initial);
  }
  std::uint64_t states() const { return seen_.size(); }

 private:
  bool dfs(std::uint64_t done, const State& s) {
    if (done == full_) return true;
    if (!seen_.emplace(done, s).second) return false;
    if (seen_.size() > max_states_) throw Exhausted{};
    std::uint64_t min_response = ~0ULL;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (!(done >> i & 1)) min_response = std::min(min_response, ops_[i].response);
    }
    std::size_t cand[64];
    std::size_t n = 0;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (done >> i & 1) continue;
      if (ops_[i].invoke > min_response) break;
      if ((done & prereq_[i]) != prereq_[i]) continue;
      cand[n++] = i;
    }
    // Lowest rank first; ranks only order the tries, never prune them.
    std::sort(cand, cand + n, [&](auto a, auto b) { return rank_[a] < rank_[b]; });
    for (std::size_t k = 0; k < n; ++k) {
      State next = s;
      if (step_(ops_[cand[k]], next) && dfs(done | (1ULL << cand[k]), next)) return true;
    }
    return false;
  }

  const std::vector<HistoryRecord>& ops_;
  std::vector<std::uint64_t> rank_;
  // Operations every legal witness places before operation i.
  std::vector<std::uint64_t> prereq_;
  Step step_;
  std::uint64_t max_states_;
  std::uint64_t full_ = 0;
  std::set<std::pair<std::uint64_t, State>> seen_;
};

bool map_step(const HistoryRecord& r, std::optional<std::uint64_t>& s) {
  switch (r.op) {
    case OpType::kInsert:
      if (r.result == OpResult::kOk && !s) {
        s = r.value;
        return true;
      }
      if (r.result == OpResult::kAlreadyExists) return s.has_value();
      return r.result == OpResult::kCapacityExhausted && !s;
    case OpType::kRemove:
      if (r.result == OpResult::kOk && s) {
        s.reset();
        return true;
      }
      return r.result == OpResult::kNotFound && !s;
    case OpType::kUpdate:
      if (r.result == OpResult::kOk && s) {
        s = r.value;
        return true;
      }
      return r.result == OpResult::kNotFound && !s;
    case OpType::kRead:
      return r.out == s;
    default:
      return false;
  }
}

bool queue_step(const HistoryRecord& r, std::vector<std::uint64_t>& q) {
  switch (r.op) {
    case OpType::kPush:
      if (r.result == OpResult::kFull) return true;
      if (r.result != OpResult::kOk) return false;
      q.push_back(r.value);
      return true;
    case OpType::kPop:
      if (r.result == OpResult::kEmpty) return q.empty();
      if (r.result != OpResult::kOk || q.empty() || !r.out || *r.out != q.front()) return false;
      q.erase(q.begin());
      return true;
    default:
      return false;
  }
}

template <typename State, typename Step>
Verdict check_partition(const std::vector<HistoryRecord>& ops, const std::string& what,
                        CheckOptions options, Step step, Verdict& total,
                        std::vector<std::uint64_t> rank = {},
                        std::vector<std::uint64_t> prereq = {}) {
  Verdict v;
  if (ops.size() > std::min<std::size_t>(options.max_ops, 64)) {
    v.kind = Verdict::Kind::kTooLarge;
    v.message = what + " has " + std::to_string(ops.size()) + " operations, over the bound of " +
                std::to_string(options.max_ops);
    v.counterexample = ops;
    return v;
  }
  for (const auto& r : ops) {
    if (r.invoke >= r.response) throw UsageError("history record responds before invocation");
  }
  if (rank.empty()) {
    // Earliest response first: the most constrained operation is the most
    // likely next step of a witness.
    for (const auto& r : ops) rank.push_back(r.response);
  }
  prereq.resize(ops.size(), 0);
  Search<State, Step> search(ops, std::move(rank), std::move(prereq), step, options.max_states);
  bool ok = false;
  try {
    ok = search.run(State{});
  } catch (const typename Search<State, Step>::Exhausted&) {
    total.states_explored += search.states();
    v.kind = Verdict::Kind::kTooLarge;
    v.message = what + " exceeded the search budget of " + std::to_string(options.max_states) +
                " states";
    v.counterexample = ops;
    return v;
  }
  total.states_explored += search.states();
  if (!ok) {
    v.kind = Verdict::Kind::kCounterexample;
    v.message = "no linearization exists for " + what + " (" + std::to_string(ops.size()) +
                " operations)";
    v.counterexample = ops;
  }
  return v;
}

}  // namespace

Verdict check_map_linearizable(const std::vector<HistoryRecord>& history, CheckOptions options) {
  std::map<std::uint64_t, std::vector<HistoryRecord>> by_key;
  for (const auto& r : history) by_key[r.key].push_back(r);
  Verdict total;
  for (auto& [key, ops] : by_key) {
    std::sort(ops.begin(), ops.end(),
              [](const auto& a, const auto& b) { return a.invoke < b.invoke; });
    Verdict v = check_partition<std::optional<std::uint64_t>>(ops, "key " + std::to_string(key),
                                                              options, map_step, total);
    if (!v.ok()) {
      v.states_explored = total.states_explored;
      return v;
    }
  }
  return total;
}

Verdict check_queue_linearizable(const std::vector<HistoryRecord>& history,
                                 CheckOptions options) {
  std::vector<HistoryRecord> ops = history;
  // Values no pop ever returns are indistinguishable to every pop, so they
  // all become one anonymous token and their mutual orders share states.
  std::set<std::uint64_t> popped, seen;
  for (const auto& r : ops) {
    if (r.op == OpType::kPop && r.out) popped.insert(*r.out);
    seen.insert(r.op == OpType::kPop && r.out ? *r.out : r.value);
  }
  std::uint64_t anonymous = ~0ULL;
  while (seen.contains(anonymous)) --anonymous;
  for (auto& r : ops) {
    if (r.op == OpType::kPush && !popped.contains(r.value)) r.value = anonymous;
  }
  auto by_invoke = [](const auto& a, const auto& b) { return a.invoke < b.invoke; };
  std::sort(ops.begin(), ops.end(), by_invoke);
  // FIFO: a value popped early was pushed early, so a push is tried at the
  // rank of the pop that returns its value.
  std::map<std::uint64_t, std::uint64_t> pop_response;
  for (const auto& r : ops) {
    if (r.op == OpType::kPop && r.out) pop_response[*r.out] = r.response;
  }
  std::vector<std::uint64_t> rank;
  for (const auto& r : ops) {
    auto it = r.op == OpType::kPush ? pop_response.find(r.value) : pop_response.end();
    rank.push_back(it != pop_response.end() ? it->second : r.response);
  }
  // Orders FIFO forces on any witness. A never-popped value pushed ahead of
  // a popped one would block it forever. Pops ordered in real time order
  // their pushes, and pushes ordered in real time order their pops.
  // These orders assume each value is pushed at most once and popped at
  // most once; otherwise the search runs without them.
  std::map<std::uint64_t, std::size_t> push_of, pop_of;
  bool unique = ops.size() <= 64;
  for (std::size_t i = 0; i < ops.size() && unique; ++i) {
    if (ops[i].op == OpType::kPush && ops[i].result == OpResult::kOk &&
        ops[i].value != anonymous) {
      unique = push_of.emplace(ops[i].value, i).second;
    }
    if (ops[i].op == OpType::kPop && ops[i].out) unique = pop_of.emplace(*ops[i].out, i).second;
  }
  if (!unique) push_of.clear(), pop_of.clear();
  std::vector<std::uint64_t> prereq(ops.size(), 0);
  for (auto [v, pv] : push_of) {
    for (auto [w, pw] : push_of) {
      if (w == v || !pop_of.contains(v) || !pop_of.contains(w)) continue;
      const auto& pop_v = ops[pop_of[v]];
      const auto& pop_w = ops[pop_of[w]];
      if (pop_w.response < pop_v.invoke) prereq[pv] |= 1ULL << pw;
      if (ops[pw].response < ops[pv].invoke) prereq[pop_of[v]] |= 1ULL << pop_of[w];
    }
  }
  for (std::size_t i = 0; i < prereq.size() && unique; ++i) {
    if (ops[i].op != OpType::kPush || ops[i].result != OpResult::kOk ||
        ops[i].value != anonymous) {
      continue;
    }
    for (auto [w, pw] : push_of) {
      if (pop_of.contains(w)) prereq[i] |= 1ULL << pw;
    }
  }
  Verdict total;
  Verdict v = check_partition<std::vector<std::uint64_t>>(ops, "the queue", options, queue_step,
                                                         total, std::move(rank), std::move(prereq));
  if (!v.counterexample.empty()) {
    v.counterexample = history;
    std::sort(v.counterexample.begin(), v.counterexample.end(), by_invoke);
  }
  v.states_explored = total.states_explored;
  return v;
}

}  // namespace loco::harness

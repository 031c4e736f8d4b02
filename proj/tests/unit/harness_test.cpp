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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <deque>
#include <numeric>
#include <random>
#include <sstream>

#include "loco/harness/bench.hpp"
#include "loco/harness/checker.hpp"
#include "loco/harness/csv.hpp"
#include "loco/harness/litmus.hpp"
#include "loco/harness/plot.hpp"
#include "loco/harness/power.hpp"
#include "loco/harness/zipf.hpp"

namespace loco::harness {
namespace {

HistoryRecord rec(OpType op, std::uint64_t key, std::uint64_t value, std::uint64_t inv,
                  std::uint64_t resp, OpResult result = OpResult::kOk,
                  std::optional<std::uint64_t> out = {}) {
  HistoryRecord r;
  r.op = op;
  r.key = key;
  r.value = value;
  r.invoke = inv;
  r.response = resp;
  r.result = result;
  r.out = out;
  return r;
}

TEST(Checker, SequentialInsertThenReadIsLinearizable) {
  std::vector<HistoryRecord> h{rec(OpType::kInsert, 5, 1, 1, 2),
                               rec(OpType::kRead, 5, 0, 3, 4, OpResult::kOk, 1)};
  EXPECT_TRUE(check_map_linearizable(h).ok());
}

TEST(Checker, ReadBeforeInsertBeginsIsRejected) {
  std::vector<HistoryRecord> h{rec(OpType::kRead, 5, 0, 1, 2, OpResult::kOk, 1),
                               rec(OpType::kInsert, 5, 1, 3, 4)};
  Verdict v = check_map_linearizable(h);
  EXPECT_EQ(v.kind, Verdict::Kind::kCounterexample);
  EXPECT_EQ(v.counterexample.size(), 2u);
}

TEST(Checker, OverlapAllowsEitherOrder) {
  // The read overlaps the insert, so both "before" and "after" are legal.
  for (std::optional<std::uint64_t> seen : {std::optional<std::uint64_t>{},
                                            std::optional<std::uint64_t>{7}}) {
    std::vector<HistoryRecord> h{rec(OpType::kInsert, 1, 7, 1, 4),
                                 rec(OpType::kRead, 1, 0, 2, 3, OpResult::kOk, seen)};
    EXPECT_TRUE(check_map_linearizable(h).ok());
  }
  std::vector<HistoryRecord> bad{rec(OpType::kInsert, 1, 7, 1, 4),
                                 rec(OpType::kRead, 1, 0, 2, 3, OpResult::kOk, 8)};
  EXPECT_FALSE(check_map_linearizable(bad).ok());
}

TEST(Checker, MapResultCodes) {
  std::vector<HistoryRecord> ok{
      rec(OpType::kUpdate, 1, 3, 1, 2, OpResult::kNotFound),
      rec(OpType::kRemove, 1, 0, 3, 4, OpResult::kNotFound),
      rec(OpType::kInsert, 1, 3, 5, 6),
      rec(OpType::kInsert, 1, 4, 7, 8, OpResult::kAlreadyExists),
      rec(OpType::kUpdate, 1, 9, 9, 10),
      rec(OpType::kRead, 1, 0, 11, 12, OpResult::kOk, 9),
      rec(OpType::kRemove, 1, 0, 13, 14),
      rec(OpType::kInsert, 1, 2, 15, 16, OpResult::kCapacityExhausted),
      rec(OpType::kRead, 1, 0, 17, 18, OpResult::kOk, std::nullopt)};
  EXPECT_TRUE(check_map_linearizable(ok).ok());
  // Two successful inserts with no remove between them.
  std::vector<HistoryRecord> dup{rec(OpType::kInsert, 1, 3, 1, 2), rec(OpType::kInsert, 1, 4, 3, 4)};
  EXPECT_FALSE(check_map_linearizable(dup).ok());
}

TEST(Checker, KeysAreCheckedIndependently) {
  std::vector<HistoryRecord> h{rec(OpType::kInsert, 1, 1, 1, 10), rec(OpType::kInsert, 2, 2, 2, 3),
                               rec(OpType::kRead, 2, 0, 4, 5, OpResult::kOk, 2),
                               rec(OpType::kRead, 1, 0, 6, 7, OpResult::kOk, std::nullopt),
                               rec(OpType::kRead, 1, 0, 11, 12, OpResult::kOk, 1)};
  EXPECT_TRUE(check_map_linearizable(h).ok());
}

TEST(Checker, OversizedPartitionIsReportedNotGuessed) {
  std::vector<HistoryRecord> h;
  for (std::uint64_t i = 0; i < 61; ++i) {
    h.push_back(rec(OpType::kRead, 3, 0, 2 * i + 1, 2 * i + 2, OpResult::kOk, std::nullopt));
  }
  EXPECT_EQ(check_map_linearizable(h).kind, Verdict::Kind::kTooLarge);
  EXPECT_TRUE(check_map_linearizable(h, {.max_ops = 64}).ok());
}

TEST(Checker, QueueFifo) {
  std::vector<HistoryRecord> ok{rec(OpType::kPush, 0, 1, 1, 2), rec(OpType::kPush, 0, 2, 3, 4),
                                rec(OpType::kPop, 0, 0, 5, 6, OpResult::kOk, 1),
                                rec(OpType::kPop, 0, 0, 7, 8, OpResult::kOk, 2),
                                rec(OpType::kPop, 0, 0, 9, 10, OpResult::kEmpty)};
  EXPECT_TRUE(check_queue_linearizable(ok).ok());
  std::vector<HistoryRecord> lifo{rec(OpType::kPush, 0, 1, 1, 2), rec(OpType::kPush, 0, 2, 3, 4),
                                  rec(OpType::kPop, 0, 0, 5, 6, OpResult::kOk, 2)};
  EXPECT_FALSE(check_queue_linearizable(lifo).ok());
  // Concurrent pushes may be dequeued in either order.
  std::vector<HistoryRecord> conc{rec(OpType::kPush, 0, 1, 1, 4), rec(OpType::kPush, 0, 2, 2, 3),
                                  rec(OpType::kPop, 0, 0, 5, 6, OpResult::kOk, 2),
                                  rec(OpType::kPop, 0, 0, 7, 8, OpResult::kOk, 1)};
  EXPECT_TRUE(check_queue_linearizable(conc).ok());
  std::vector<HistoryRecord> phantom{rec(OpType::kPop, 0, 0, 1, 2, OpResult::kEmpty),
                                     rec(OpType::kPush, 0, 1, 3, 4),
                                     rec(OpType::kPop, 0, 0, 5, 6, OpResult::kEmpty)};
  EXPECT_FALSE(check_queue_linearizable(phantom).ok());
}

// Random small histories with intervals drawn from a shuffled event order.
std::vector<HistoryRecord> random_intervals(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> slots(2 * n);
  std::iota(slots.begin(), slots.end(), 1);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<HistoryRecord> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i].invoke = std::min(slots[2 * i], slots[2 * i + 1]);
    h[i].response = std::max(slots[2 * i], slots[2 * i + 1]);
  }
  return h;
}

// Tries every order that respects real time and replays it sequentially.
template <typename Apply>
bool brute_force(std::vector<HistoryRecord> h, Apply apply) {
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), 0);
  do {
    bool legal = true;
    for (std::size_t a = 0; a < order.size() && legal; ++a) {
      for (std::size_t b = a + 1; b < order.size() && legal; ++b) {
        if (h[order[b]].response < h[order[a]].invoke) legal = false;
      }
    }
    if (legal && apply(h, order)) return true;
  } while (std::next_permutation(order.begin(), order.end()));
  return false;
}

TEST(Checker, QueueAgreesWithBruteForce) {
  std::mt19937_64 rng(17);
  int ok = 0, bad = 0;
  for (int iter = 0; iter < 3000; ++iter) {
    std::size_t n = 3 + rng() % 5;
    auto h = random_intervals(rng, n);
    std::uint64_t next_value = 1;
    for (auto& r : h) {
      if (rng() % 2) {
        r.op = OpType::kPush;
        // Occasional repeated values exercise the path without FIFO orders.
        r.value = rng() % 10 == 0 ? 1 : next_value++;
        r.result = rng() % 12 == 0 ? OpResult::kFull : OpResult::kOk;
      } else {
        r.op = OpType::kPop;
        std::uint64_t pick = rng() % (n / 2 + 2);
        if (pick == 0) {
          r.result = OpResult::kEmpty;
        } else {
          r.out = pick;
        }
      }
    }
    bool expect = brute_force(h, [](const auto& hist, const auto& order) {
      std::deque<std::uint64_t> q;
      for (auto i : order) {
        const auto& r = hist[i];
        if (r.op == OpType::kPush) {
          if (r.result == OpResult::kOk) q.push_back(r.value);
        } else if (!r.out) {
          if (!q.empty()) return false;
        } else {
          if (q.empty() || q.front() != *r.out) return false;
          q.pop_front();
        }
      }
      return true;
    });
    Verdict v = check_queue_linearizable(h);
    ASSERT_EQ(v.ok(), expect) << "iteration " << iter;
    (expect ? ok : bad)++;
  }
  EXPECT_GT(ok, 300);
  EXPECT_GT(bad, 300);
}

TEST(Checker, MapAgreesWithBruteForce) {
  std::mt19937_64 rng(18);
  int ok = 0, bad = 0;
  for (int iter = 0; iter < 3000; ++iter) {
    std::size_t n = 3 + rng() % 5;
    auto h = random_intervals(rng, n);
    for (auto& r : h) {
      r.key = 4;
      r.op = std::array{OpType::kInsert, OpType::kRemove, OpType::kUpdate, OpType::kRead}[rng() % 4];
      r.value = 1 + rng() % 3;
      if (r.op == OpType::kRead) {
        if (rng() % 3) r.out = 1 + rng() % 3;
      } else {
        r.result = rng() % 3 ? OpResult::kOk
                             : (r.op == OpType::kInsert ? OpResult::kAlreadyExists
                                                        : OpResult::kNotFound);
      }
    }
    bool expect = brute_force(h, [](const auto& hist, const auto& order) {
      std::optional<std::uint64_t> s;
      for (auto i : order) {
        const auto& r = hist[i];
        bool ok_result = r.result == OpResult::kOk;
        switch (r.op) {
          case OpType::kInsert:
            if (ok_result != !s.has_value()) return false;
            if (ok_result) s = r.value;
            break;
          case OpType::kRemove:
          case OpType::kUpdate:
            if (ok_result != s.has_value()) return false;
            if (ok_result && r.op == OpType::kRemove) s.reset();
            if (ok_result && r.op == OpType::kUpdate) s = r.value;
            break;
          default:
            if (r.out != s) return false;
        }
      }
      return true;
    });
    Verdict v = check_map_linearizable(h);
    ASSERT_EQ(v.ok(), expect) << "iteration " << iter;
    (expect ? ok : bad)++;
  }
  EXPECT_GT(ok, 300);
  EXPECT_GT(bad, 300);
}

TEST(Checker, QueueSearchBudgetReportsTooLarge) {
  std::vector<HistoryRecord> h;
  for (std::uint64_t i = 0; i < 20; ++i) h.push_back(rec(OpType::kPush, 0, i + 1, 1 + i, 100 + i));
  for (std::uint64_t i = 0; i < 20; ++i) {
    h.push_back(rec(OpType::kPop, 0, 0, 50 + i, 200 + i, OpResult::kOk, 20 - i));
  }
  EXPECT_EQ(check_queue_linearizable(h, {.max_states = 10}).kind, Verdict::Kind::kTooLarge);
}

TEST(History, LogicalClockOrdersRecords) {
  History h;
  auto& a = h.log(0, 0);
  auto& b = h.log(1, 0);
  auto ta = a.begin(OpType::kInsert, 1, 1);
  auto tb = b.begin(OpType::kRead, 1);
  a.end(ta, OpResult::kOk);
  b.end(tb, OpResult::kOk, 1);
  auto m = h.merged();
  ASSERT_EQ(m.size(), 2u);
  EXPECT_LT(m[0].invoke, m[1].invoke);
  EXPECT_LT(m[0].invoke, m[0].response);
  EXPECT_THROW(a.end(ta, OpResult::kOk), UsageError);
}

// Exact Zipf mass computed here from its definition, independent of the
// generator's own bookkeeping.
TEST(Zipf, FrequenciesMatchAnalyticMass) {
  const std::uint64_t n = 10'000;
  const double theta = 0.99;
  double z = 0;
  for (std::uint64_t i = 1; i <= n; ++i) z += std::pow(static_cast<double>(i), -theta);
  ZipfianGenerator g(n, theta);
  std::mt19937_64 rng(42);
  std::vector<std::uint64_t> counts(n);
  const int samples = 1'000'000;
  for (int i = 0; i < samples; ++i) ++counts[g(rng)];
  for (std::uint64_t rank : {1, 100}) {
    double expect = std::pow(static_cast<double>(rank), -theta) / z;
    double got = static_cast<double>(counts[rank - 1]) / samples;
    EXPECT_NEAR(got / expect, 1.0, 0.05) << "rank " << rank;
  }
  EXPECT_GT(counts[0], 50 * counts[99]);
}

TEST(Zipf, ChooserStaysInKeyspace) {
  KeyChooser z(KeyDistribution::kZipfian, 1000);
  KeyChooser u(KeyDistribution::kUniform, 1000);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100'000; ++i) {
    EXPECT_LT(z(rng), 1000u);
    EXPECT_LT(u(rng), 1000u);
  }
  EXPECT_THROW(ZipfianGenerator(10, 1.5), UsageError);
}

TEST(Csv, QuotingRoundTrips) {
  std::ostringstream out;
  CsvWriter w(out, {"name", "value"});
  w.meta("seed", "7");
  w.values("plain", 1);
  w.values("has,comma", 2.5);
  w.values("say \"hi\"", -3);
  w.values("two\nlines", 0);
  EXPECT_THROW(w.meta("late", "x"), UsageError);
  EXPECT_THROW(w.row({"one"}), UsageError);
  EXPECT_EQ(w.rows(), 4u);
  std::string s = out.str();
  EXPECT_EQ(s.rfind("# seed=7\r\nname,value\r\nplain,1\r\n", 0), 0u);
  EXPECT_NE(s.find("\"has,comma\",2.5\r\n"), std::string::npos);
  EXPECT_NE(s.find("\"say \"\"hi\"\"\",-3"), std::string::npos);
  auto f = parse_csv_record("\"say \"\"hi\"\"\",-3");
  EXPECT_EQ(f, (std::vector<std::string>{"say \"hi\"", "-3"}));
  EXPECT_EQ(parse_csv_record("\"has,comma\",2.5"), (std::vector<std::string>{"has,comma", "2.5"}));
}

TEST(Plot, SvgHasSeriesAndEscapedLabels) {
  LineChart c;
  c.title = "V < ref & more";
  c.series.push_back({"out", {{0, 1}, {1, 2}, {2, 1.5}}});
  c.guides.push_back({"ref", 1.7});
  std::string svg = render_svg(c);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("V &lt; ref &amp; more"), std::string::npos);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
}

// Closed-loop poles from the companion matrix of the sampled loop, found by
// power iteration on the state recurrence rather than the quadratic formula.
double oracle_growth(double alpha, double kp, double ki, int m) {
  double a = std::pow(alpha, m), b = 1 - a;
  // State (y, u, e_prev) with r = 0: y' = a y + b u, e = -y', u' = u + kp (e - e_prev) + ki e.
  double y = 1, u = 0, ep = -1;
  double norm = 1;
  for (int k = 0; k < 4000; ++k) {
    double e = -y;
    double un = u + kp * (e - ep) + ki * e;
    double yn = a * y + b * un;
    y = yn, u = un, ep = e;
    double s = std::abs(y) + std::abs(u) + std::abs(ep);
    if (k >= 3000) norm *= std::pow(s, 1.0 / 1000);
    y /= s, u /= s, ep /= s;
  }
  return norm;
}

TEST(Power, ThresholdMatchesPoleOracle) {
  PowerModel m = PowerModel::designed_for(40'000);
  EXPECT_NEAR(m.threshold_ns(), 40'000, 1e-6);
  int last_stable = 0;
  for (int steps = 1; steps <= 12; ++steps) {
    double g = oracle_growth(m.alpha, m.kp, m.ki, steps);
    EXPECT_NEAR(g, m.spectral_radius(steps * 10'000.0), 1e-3) << steps;
    if (g < 1 - 1e-6) last_stable = steps;
  }
  EXPECT_EQ(last_stable, 3);
  EXPECT_LT(m.spectral_radius(20'000), 1.0);
  EXPECT_GT(m.spectral_radius(80'000), 1.0);
}

TEST(Power, SettlesBelowThresholdOscillatesAbove) {
  PowerModel m = PowerModel::designed_for(40'000);
  PowerRun fast = sim_power(m, {.controller_period_ns = 20'000});
  EXPECT_TRUE(fast.settled()) << fast.outside_band << "/" << fast.judged_samples;
  EXPECT_NEAR(fast.output.back().second, 240.0, 240.0 * 0.02);
  PowerRun slow = sim_power(m, {.controller_period_ns = 80'000});
  EXPECT_TRUE(slow.unstable()) << slow.outside_band << "/" << slow.judged_samples;
}

TEST(Power, ZeroConvertersIsTriviallyStable) {
  PowerRun r = sim_power(PowerModel::designed_for(), {.converters = 0, .duration_ns = 1'000'000});
  EXPECT_EQ(r.v_ref, 0.0);
  EXPECT_TRUE(r.settled());
  for (auto [t, v] : r.output) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(sim_power(PowerModel::designed_for(), {.controller_period_ns = 0}), UsageError);
}

TEST(Litmus, FenceOffAdmitsStaleReadsFenceOnDoesNot) {
  int stale_off = 0, stale_on = 0, stale_wrong = 0;
  for (std::uint64_t s = 1; s <= 300; ++s) {
    stale_off += message_passing(FenceVariant::kNone, s).stale;
    stale_on += message_passing(FenceVariant::kPair, s).stale;
    stale_wrong += message_passing(FenceVariant::kPairWrongPeer, s).stale;
  }
  EXPECT_GT(stale_off, 0);
  EXPECT_EQ(stale_on, 0);
  EXPECT_GT(stale_wrong, 0);
}

TEST(Litmus, SameSeedSameOutcome) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    auto a = message_passing(FenceVariant::kNone, s);
    auto b = message_passing(FenceVariant::kNone, s);
    EXPECT_EQ(a.stale, b.stale);
    EXPECT_EQ(a.end_time, b.end_time);
  }
}

TEST(Bench, BarrierRecordsEveryIteration) {
  SimCluster c({.nodes = 4, .seed = 3, .model = PlacementModel::adversarial(8)});
  BarrierResult r = bench_barrier(c, 200);
  EXPECT_EQ(r.latencies.size(), 200u);
  EXPECT_EQ(r.violations, 0u);
  SimCluster one({.nodes = 1});
  BarrierResult solo = bench_barrier(one, 10);
  EXPECT_EQ(solo.latencies.size(), 10u);
}

TEST(Bench, SingleLockCounterMatchesOps) {
  SimCluster c({.nodes = 3, .seed = 5});
  LockResult r = bench_locks(c, {.threads = 2, .ops_per_thread = 300, .record_grants = true});
  EXPECT_EQ(r.ops, 1800u);
  EXPECT_EQ(r.counter, 1800u);
  EXPECT_EQ(r.exclusion_violations, 0u);
  ASSERT_EQ(r.grant_tickets.size(), 1800u);
  EXPECT_TRUE(std::is_sorted(r.grant_tickets.begin(), r.grant_tickets.end()));
  EXPECT_GT(r.throughput(), 0);
}

TEST(Bench, TransfersConserveBalance) {
  SimCluster c({.nodes = 3, .seed = 6, .model = PlacementModel::adversarial(8)});
  LockResult r = bench_locks(c, {.mode = LockMode::kTransactional, .threads = 2,
                                 .ops_per_thread = 500, .accounts = 1000, .locks_per_thread = 8});
  EXPECT_EQ(r.ops, 3000u);
  EXPECT_EQ(r.num_locks, 48u);
  EXPECT_EQ(r.balance_before, 1000u * 1000u);
  EXPECT_EQ(r.balance_after, r.balance_before);
}

TEST(Bench, ReadOnlyFindsEveryPrefilledKey) {
  SimCluster c({.nodes = 3, .seed = 7});
  KvResult r = bench_kv(c, {.distribution = KeyDistribution::kZipfian, .keyspace = 500,
                            .ops_per_thread = 500, .threads = 2, .window = 8});
  EXPECT_EQ(r.prefilled, 400u);
  EXPECT_EQ(r.ops(), 3000u);
  EXPECT_EQ(r.empty_prefilled_reads(), 0u);
}

TEST(Bench, LargeWindowIsNotSlower) {
  auto run = [](std::size_t window) {
    SimCluster c({.nodes = 3, .seed = 8, .window = window});
    return bench_kv(c, {.read_fraction = 0.5, .keyspace = 500, .ops_per_thread = 400,
                        .threads = 2, .window = window, .seed = 8})
        .throughput();
  };
  EXPECT_GE(run(128), run(3));
}

TEST(Bench, KvHistoriesAreLinearizable) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    SimCluster c({.nodes = 3, .seed = s});
    CheckRun r = kv_check_run(c, {.seed = s});
    EXPECT_EQ(r.history.size(), 240u);
    EXPECT_TRUE(r.verdict.ok()) << "seed " << s << ": " << r.verdict.message;
  }
}

TEST(Bench, SkippedAckWaitIsCaught) {
  int caught = 0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    SimCluster c({.nodes = 3, .seed = s});
    KvCheckParams p{.seed = s};
    p.store.skip_ack_wait = true;
    caught += kv_check_run(c, p).verdict.kind == Verdict::Kind::kCounterexample;
  }
  EXPECT_GE(caught, 15);
}

TEST(Bench, QueueHistoriesAreLinearizable) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    SimCluster c({.nodes = 3, .seed = s, .model = PlacementModel::adversarial(8)});
    CheckRun r = queue_check_run(c, {.seed = s});
    EXPECT_EQ(r.history.size(), 48u);
    EXPECT_TRUE(r.verdict.ok()) << "seed " << s << ": " << r.verdict.message;
  }
}

}  // namespace
}  // namespace loco::harness

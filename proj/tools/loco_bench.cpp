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

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>

#include "loco/harness/bench.hpp"
#include "loco/harness/csv.hpp"
#include "loco/harness/plot.hpp"
#include "loco/harness/power.hpp"

namespace {

using namespace loco;
using namespace loco::harness;

struct Common {
  std::string hosts;
  std::size_t nodes = 3;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  std::string backend = "inproc";
  std::size_t window = kDefaultWindow;
  std::string csv;
  bool check = false;
  bool fence_off = false;
  NodeId node_id = 0;
  std::string placement = "default";
  std::size_t tear = 256;
};

void add_common(CLI::App* app, Common& o) {
  app->add_option("--hosts", o.hosts, "hosts file (socket backend, one process per node)");
  app->add_option("--nodes", o.nodes, "cluster size")->check(CLI::Range(1, 64));
  app->add_option("--threads", o.threads, "application threads per node")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "seed");
  app->add_option("--backend", o.backend)->check(CLI::IsMember({"inproc", "socket"}));
  app->add_option("--window", o.window, "outstanding verbs per thread")->check(CLI::PositiveNumber);
  app->add_option("--csv", o.csv, "output file (default stdout)");
  app->add_flag("--check", o.check, "record histories and run the linearizability checker");
  app->add_flag("--fence-off", o.fence_off, "disable fences (testing only)");
  app->add_option("--node-id", o.node_id, "this process's node id with --hosts");
  app->add_option("--placement", o.placement, "inproc placement model")
      ->check(CLI::IsMember({"default", "zero", "adversarial"}));
  app->add_option("--tear", o.tear, "inproc tear granularity in bytes")->check(CLI::PositiveNumber);
}

std::unique_ptr<Cluster> make_cluster(const Common& o) {
  std::unique_ptr<Cluster> c;
  if (o.backend == "socket") {
    c = std::make_unique<SocketCluster>(SocketCluster::Options{
        .nodes = o.nodes, .hosts_file = o.hosts, .node_id = o.node_id, .window = o.window});
  } else {
    if (!o.hosts.empty()) throw UsageError("--hosts needs --backend socket");
    PlacementModel model;
    if (o.placement == "zero") model = PlacementModel::zero();
    if (o.placement == "adversarial") model = PlacementModel::adversarial(o.tear);
    model.tear_granularity = o.tear;
    c = std::make_unique<SimCluster>(
        SimCluster::Options{.nodes = o.nodes, .seed = o.seed, .model = model, .window = o.window});
  }
  if (o.fence_off) {
    for (NodeId n : c->local_nodes()) c->mgr(n).set_fences_enabled(false);
  }
  return c;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw UsageError("cannot open " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void common_meta(CsvWriter& w, const Common& o, const std::string& bench) {
  w.meta("bench", bench);
  w.meta("backend", o.backend);
  w.meta("nodes", std::to_string(o.nodes));
  w.meta("threads", std::to_string(o.threads));
  w.meta("seed", std::to_string(o.seed));
  w.meta("window", std::to_string(o.window));
  w.meta("fences", o.fence_off ? "off" : "on");
  if (o.backend == "inproc") {
    w.meta("placement", o.placement);
    w.meta("tear_granularity", std::to_string(o.tear));
  }
}

int run_barrier(const Common& o, std::size_t iters) {
  auto c = make_cluster(o);
  BarrierResult r = bench_barrier(*c, iters);
  Output out(o.csv);
  CsvWriter w(out.stream(), {"iteration", "latency_ns"});
  common_meta(w, o, "barrier");
  w.meta("violations", std::to_string(r.violations));
  for (std::size_t i = 0; i < r.latencies.size(); ++i) w.values(i, r.latencies[i]);
  return r.violations == 0 ? 0 : 1;
}

int run_locks(const Common& o, LockParams p) {
  p.threads = o.threads;
  p.seed = o.seed;
  auto c = make_cluster(o);
  LockResult r = bench_locks(*c, p);
  Output out(o.csv);
  CsvWriter w(out.stream(), {"mode", "ops", "elapsed_ns", "throughput_ops_s", "num_locks",
                             "remote_acquisitions", "exclusion_violations", "counter",
                             "balance_before", "balance_after"});
  common_meta(w, o, "locks");
  w.meta("accounts", std::to_string(p.accounts));
  w.meta("locks_per_thread", std::to_string(p.locks_per_thread));
  w.values(p.mode == LockMode::kSingle ? "single" : "transactional", r.ops, r.elapsed_ns,
           r.throughput(), r.num_locks, r.remote_acquisitions, r.exclusion_violations, r.counter,
           r.balance_before, r.balance_after);
  bool ok = r.exclusion_violations == 0 &&
            (p.mode == LockMode::kSingle || r.balance_before == r.balance_after);
  return ok ? 0 : 1;
}

int run_kv_check(const Common& o, std::size_t runs, const std::string& target) {
  Output out(o.csv);
  CsvWriter w(out.stream(), {"run", "seed", "target", "ops", "verdict", "states", "message"});
  common_meta(w, o, "check");
  int failures = 0;
  for (std::size_t i = 0; i < runs; ++i) {
    Common oi = o;
    oi.seed = o.seed + i;
    auto c = make_cluster(oi);
    CheckRun r = target == "queue"
                     ? queue_check_run(*c, {.threads = o.threads, .seed = oi.seed})
                     : kv_check_run(*c, {.threads = o.threads, .seed = oi.seed});
    const char* kind = r.verdict.ok() ? "ok"
                       : r.verdict.kind == Verdict::Kind::kTooLarge ? "too_large"
                                                                      : "counterexample";
    failures += !r.verdict.ok();
    w.values(i, oi.seed, target, r.history.size(), kind, r.verdict.states_explored,
             r.verdict.message);
  }
  return failures == 0 ? 0 : 1;
}

int run_kv(const Common& o, WorkloadSpec spec) {
  spec.threads = o.threads;
  spec.window = o.window;
  spec.seed = o.seed;
  auto c = make_cluster(o);
  KvResult r = bench_kv(*c, spec);
  Output out(o.csv);
  CsvWriter w(out.stream(), {"node", "reads", "updates", "empty_prefilled_reads", "elapsed_ns",
                             "throughput_ops_s"});
  common_meta(w, o, "kv");
  w.meta("keyspace", std::to_string(spec.keyspace));
  w.meta("read_fraction", std::to_string(spec.read_fraction));
  w.meta("distribution", spec.distribution == KeyDistribution::kZipfian ? "zipfian" : "uniform");
  w.meta("theta", std::to_string(spec.theta));
  w.meta("key_hash", "splitmix64");
  w.meta("prefilled", std::to_string(r.prefilled));
  w.meta("total_throughput_ops_s", std::to_string(r.throughput()));
  for (const auto& n : r.nodes) {
    double tput = n.elapsed_ns > 0 ? static_cast<double>(n.reads + n.updates) * 1e9 /
                                         static_cast<double>(n.elapsed_ns)
                                   : 0;
    w.values(n.node, n.reads, n.updates, n.empty_prefilled_reads, n.elapsed_ns, tput);
  }
  int rc = r.empty_prefilled_reads() == 0 || spec.read_fraction < 1 ? 0 : 1;
  if (o.check) {
    Common small = o;
    small.threads = std::min<std::size_t>(o.threads, 2);
    auto cc = make_cluster(small);
    CheckRun cr = kv_check_run(*cc, {.threads = small.threads, .seed = o.seed});
    std::cerr << "check: " << cr.history.size() << " ops, "
              << (cr.verdict.ok() ? "linearizable" : cr.verdict.message) << "\n";
    if (!cr.verdict.ok()) rc = 1;
  }
  return rc;
}

int run_power(const Common& o, std::size_t converters, TimeNs period, TimeNs duration,
              const std::string& svg) {
  if (o.backend != "inproc") throw UsageError("power runs on the inproc backend only");
  PowerModel m = PowerModel::designed_for();
  PowerRun r = sim_power(m, {.converters = converters, .controller_period_ns = period,
                             .duration_ns = duration, .seed = o.seed});
  Output out(o.csv);
  CsvWriter w(out.stream(), {"t_ns", "output_v"});
  w.meta("bench", "power");
  w.meta("seed", std::to_string(o.seed));
  w.meta("converters", std::to_string(converters));
  w.meta("controller_period_ns", std::to_string(period));
  w.meta("threshold_ns", std::to_string(m.threshold_ns()));
  w.meta("kp", std::to_string(m.kp));
  w.meta("ki", std::to_string(m.ki));
  w.meta("alpha", std::to_string(m.alpha));
  w.meta("spectral_radius", std::to_string(m.spectral_radius(static_cast<double>(period))));
  w.meta("v_ref", std::to_string(r.v_ref));
  w.meta("outside_band", std::to_string(r.outside_band) + "/" + std::to_string(r.judged_samples));
  w.meta("verdict", r.settled() ? "settled" : r.unstable() ? "unstable" : "marginal");
  for (auto [t, v] : r.output) w.values(t, v);
  if (!svg.empty()) {
    LineChart chart;
    chart.title = "controller period " + std::to_string(period / 1000) + " us";
    chart.x_label = "time (us)";
    chart.y_label = "output (V)";
    Series s{"output", {}};
    for (auto [t, v] : r.output) s.points.emplace_back(static_cast<double>(t) / 1000.0, v);
    chart.series.push_back(std::move(s));
    chart.guides.push_back({"V_ref", r.v_ref});
    chart.guides.push_back({"+2%", r.v_ref * 1.02});
    chart.guides.push_back({"-2%", r.v_ref * 0.98});
    std::ofstream f(svg, std::ios::binary);
    if (!f) throw UsageError("cannot open " + svg);
    f << render_svg(chart);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loco-bench: benchmarks and checks for the loco channel library"};
  app.require_subcommand(1);
  Common o;

  auto* barrier = app.add_subcommand("barrier", "barrier latency");
  add_common(barrier, o);
  std::size_t iters = 1000;
  barrier->add_option("--iters", iters)->check(CLI::PositiveNumber);

  auto* locks = app.add_subcommand("locks", "ticket lock throughput");
  add_common(locks, o);
  LockParams lp;
  std::string mode = "single";
  locks->add_option("--mode", mode)->check(CLI::IsMember({"single", "transactional"}));
  locks->add_option("--ops", lp.ops_per_thread, "operations per thread");
  locks->add_option("--accounts", lp.accounts);
  locks->add_option("--locks-per-thread", lp.locks_per_thread)->check(CLI::PositiveNumber);

  auto* kv = app.add_subcommand("kv", "key-value store throughput");
  add_common(kv, o);
  WorkloadSpec spec;
  std::string dist = "uniform";
  kv->add_option("--keys", spec.keyspace, "keyspace size")->check(CLI::PositiveNumber);
  kv->add_option("--read-fraction", spec.read_fraction)->check(CLI::Range(0.0, 1.0));
  kv->add_option("--dist", dist)->check(CLI::IsMember({"uniform", "zipfian"}));
  kv->add_option("--theta", spec.theta);
  kv->add_option("--prefill", spec.prefill)->check(CLI::Range(0.0, 1.0));
  kv->add_option("--ops", spec.ops_per_thread, "operations per thread");

  auto* power = app.add_subcommand("power", "distributed power controller simulation");
  add_common(power, o);
  std::size_t converters = 20;
  TimeNs period = 20'000, duration = 20'000'000;
  std::string svg;
  power->add_option("--converters", converters);
  power->add_option("--period", period, "controller period in ns")->check(CLI::PositiveNumber);
  power->add_option("--duration", duration, "simulated ns")->check(CLI::PositiveNumber);
  power->add_option("--svg", svg, "write the output trace as SVG");

  auto* check = app.add_subcommand("check", "seeded linearizability checks");
  add_common(check, o);
  std::size_t runs = 10;
  std::string target = "kv";
  check->add_option("--runs", runs)->check(CLI::PositiveNumber);
  check->add_option("--target", target)->check(CLI::IsMember({"kv", "queue"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*barrier) return run_barrier(o, iters);
    if (*locks) {
      lp.mode = mode == "single" ? LockMode::kSingle : LockMode::kTransactional;
      return run_locks(o, lp);
    }
    if (*kv) {
      spec.distribution = dist == "zipfian" ? KeyDistribution::kZipfian : KeyDistribution::kUniform;
      return run_kv(o, spec);
    }
    if (*power) return run_power(o, converters, period, duration, svg);
    if (*check) return run_kv_check(o, runs, target);
  } catch (const std::exception& e) {
    std::cerr << "loco-bench: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

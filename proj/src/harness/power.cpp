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

#include "loco/harness/power.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "loco/channels/barrier.hpp"
#include "loco/channels/owned_var.hpp"
#include "loco/harness/cluster.hpp"

namespace loco::harness {

PowerModel PowerModel::designed_for(TimeNs threshold_ns, double ki) {
  PowerModel m;
  m.ki = ki;
  double steps = static_cast<double>(threshold_ns) / static_cast<double>(m.step_ns);
  double x = std::pow(m.alpha, steps);
  double g = 2 * (1 + x) / (1 - x);
  m.kp = (g - ki) / 2;
  return m;
}

double PowerModel::threshold_ns() const {
  double g = 2 * kp + ki;
  if (g <= 2) return INFINITY;
  return static_cast<double>(step_ns) * std::log((g - 2) / (g + 2)) / std::log(alpha);
}

std::array<std::complex<double>, 2> PowerModel::poles(double period_ns) const {
  double a = std::pow(alpha, period_ns / static_cast<double>(step_ns));
  double b = 1 - a;
  double c1 = b * (kp + ki) - 1 - a;
  double c0 = a - b * kp;
  std::complex<double> disc = std::sqrt(std::complex<double>(c1 * c1 - 4 * c0));
  return {(-c1 + disc) / 2.0, (-c1 - disc) / 2.0};
}

double PowerModel::spectral_radius(double period_ns) const {
  auto p = poles(period_ns);
  return std::max(std::abs(p[0]), std::abs(p[1]));
}

PowerRun sim_power(const PowerModel& model, const PowerParams& params) {
  if (params.controller_period_ns <= 0 || params.duration_ns <= 0) {
    throw UsageError("power simulation needs a positive period and duration");
  }
  if (!(params.judged_fraction > 0 && params.judged_fraction <= 1) || params.band < 0) {
    throw UsageError("power simulation band parameters out of range");
  }
  const std::size_t n = params.converters;
  const TimeNs step = model.step_ns;
  PowerRun run;
  run.v_ref = model.v_ref_per_converter * static_cast<double>(n);

  const std::size_t conv_nodes = std::min<std::size_t>(n, 4);
  SimCluster c({.nodes = 1 + conv_nodes, .seed = params.seed, .model = params.placement,
                .window = 128});
  auto node_of = [&](std::size_t i) { return static_cast<NodeId>(1 + i % conv_nodes); };

  std::vector<double> truth(n, 0.0);
  std::vector<std::vector<std::unique_ptr<OwnedVar<double>>>> volts(1 + conv_nodes);
  std::vector<std::vector<std::unique_ptr<OwnedVar<double>>>> duty(1 + conv_nodes);
  for (NodeId node = 0; node <= conv_nodes; ++node) {
    for (std::size_t i = 0; i < n; ++i) {
      volts[node].push_back(std::make_unique<OwnedVar<double>>(
          c.mgr(node), "v" + std::to_string(i), node_of(i)));
      duty[node].push_back(std::make_unique<OwnedVar<double>>(
          c.mgr(node), "d" + std::to_string(i), 0));
    }
  }
  std::vector<std::unique_ptr<Barrier>> start;
  for (NodeId node = 0; node <= conv_nodes; ++node) {
    start.push_back(std::make_unique<Barrier>(c.mgr(node), "start", 1 + conv_nodes));
  }

  // The plant's clock is physical, so every task shares one start instant.
  TimeNs t0 = -1;
  auto start_time = [&] {
    if (t0 < 0) t0 = c.rt().now() + 50'000;
    return t0;
  };
  const double r = model.v_ref_per_converter / model.v_in;
  const double norm = static_cast<double>(n) * model.v_in;

  // Controller ticks fall half a step after converter steps: the sample it
  // reads is the step just taken and its new duty is in place for the next.
  c.spawn(0, "controller", [&] {
    Manager& m = c.mgr(0);
    m.wait_for_ready();
    start[0]->waiting();
    TimeNs begin = start_time() + step / 2;
    double u = 0, e_prev = r;
    for (TimeNs next = begin; next < begin + params.duration_ns;
         next += params.controller_period_ns) {
      c.rt().sleep_for(std::max<TimeNs>(0, next - c.rt().now()));
      double y = 0;
      for (auto& v : volts[0]) y += v->load();
      double e = n == 0 ? 0 : r - y / norm;
      u = std::clamp(u + model.kp * (e - e_prev) + model.ki * e, 0.0, 1.0);
      e_prev = e;
      for (std::size_t i = 0; i < n; ++i) {
        duty[0][i]->store_mine(u);
        duty[0][i]->push(node_of(i));
      }
    }
    m.fence();
  });

  for (NodeId node = 1; node <= conv_nodes; ++node) {
    c.spawn(node, "converters", [&, node] {
      Manager& m = c.mgr(node);
      m.wait_for_ready();
      start[node]->waiting();
      TimeNs begin = start_time();
      std::vector<double> v(n, 0.0);
      for (TimeNs next = begin; next < begin + params.duration_ns; next += step) {
        c.rt().sleep_for(std::max<TimeNs>(0, next - c.rt().now()));
        for (std::size_t i = 0; i < n; ++i) {
          if (node_of(i) != node) continue;
          double d = std::clamp(duty[node][i]->load(), 0.0, 1.0);
          v[i] = model.alpha * v[i] + (1 - model.alpha) * d * model.v_in;
          truth[i] = v[i];
          volts[node][i]->store_mine(v[i]);
          volts[node][i]->push(0);
        }
      }
      m.fence();
    });
  }

  c.spawn(0, "probe", [&] {
    c.mgr(0).wait_for_ready();
    while (t0 < 0) c.rt().sleep_for(step / 10);
    TimeNs begin = t0 + step / 2;
    for (TimeNs t = begin; t < begin + params.duration_ns; t += step) {
      c.rt().sleep_for(std::max<TimeNs>(0, t - c.rt().now()));
      double sum = 0;
      for (double v : truth) sum += v;
      run.output.emplace_back(t - begin, sum);
    }
  });

  c.run();

  auto judged_from = static_cast<std::size_t>(
      std::ceil(static_cast<double>(run.output.size()) * (1 - params.judged_fraction)));
  for (std::size_t i = judged_from; i < run.output.size(); ++i) {
    ++run.judged_samples;
    if (std::abs(run.output[i].second - run.v_ref) > params.band * run.v_ref) ++run.outside_band;
  }
  return run;
}

}  // namespace loco::harness

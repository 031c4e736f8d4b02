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

#include <array>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "loco/fabric.hpp"

namespace loco::harness {

// N first-order buck converters summed into one output, regulated by one
// incremental PI controller on e = V_ref - sum(V). Converter i steps every
// 10 us:  V_i <- alpha V_i + (1 - alpha) d_i V_in.  The controller runs every
// period P and its gains are normalized by N V_in, so the loop seen at the
// controller's sampling instants is, with m = P / step, a = alpha^m, b = 1 - a:
//   y[k+1] = a y[k] + b u[k],   u[k] = u[k-1] + kp (e[k] - e[k-1]) + ki e[k],
// giving the characteristic polynomial z^2 + (b (kp + ki) - 1 - a) z + (a - b kp).
// Its roots leave the unit circle through z = -1 once a < (g - 2) / (g + 2)
// with g = 2 kp + ki, which puts the stability threshold at
//   D* = step ln((g - 2) / (g + 2)) / ln(alpha).
struct PowerModel {
  double alpha = 0.9;
  double v_in = 48.0;
  double v_ref_per_converter = 12.0;
  double kp = 0;
  double ki = 1.0;
  TimeNs step_ns = 10'000;

  // Chooses kp so that the threshold lands on threshold_ns.
  static PowerModel designed_for(TimeNs threshold_ns = 40'000, double ki = 1.0);

  double threshold_ns() const;
  std::array<std::complex<double>, 2> poles(double period_ns) const;
  double spectral_radius(double period_ns) const;
};

struct PowerParams {
  std::size_t converters = 20;
  TimeNs controller_period_ns = 20'000;
  TimeNs duration_ns = 20'000'000;
  std::uint64_t seed = 1;
  // Verb latency stays well under half a step, so the sampled loop is the
  // modelled one.
  PlacementModel placement = PlacementModel::zero();
  // Fraction of the run, at the end, that must stay inside the band.
  double judged_fraction = 0.8;
  double band = 0.02;
};

struct PowerRun {
  double v_ref = 0;
  // (time ns, summed output volts), one sample per converter step.
  std::vector<std::pair<TimeNs, double>> output;
  std::size_t judged_samples = 0;
  std::size_t outside_band = 0;

  bool settled() const { return outside_band == 0; }
  bool unstable() const { return outside_band * 2 > judged_samples; }
};

// Runs converters and controller as tasks on a simulated cluster: node 0
// hosts the controller, converters spread over up to four more nodes, and
// V_i and d_i travel as owned variables.
PowerRun sim_power(const PowerModel& model, const PowerParams& params);

}  // namespace loco::harness

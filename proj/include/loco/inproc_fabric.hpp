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

#include <deque>
#include <memory>
#include <vector>

#include "loco/fabric.hpp"
#include "loco/sim_runtime.hpp"

namespace loco {

class InProcNic;

// Deterministic in-process fabric: every node lives in this process and
// every verb is a chain of scheduled events on a SimRuntime. Placement
// times, packet gaps and completion times are drawn from the runtime's
// seeded engine, so a seed fixes the whole execution.
class InProcFabric {
 public:
  InProcFabric(SimRuntime& rt, std::size_t num_nodes, PlacementModel model,
               NodeMemory::Config memory = {});
  ~InProcFabric();

  std::size_t num_nodes() const { return nics_.size(); }
  Nic& nic(NodeId id);
  const PlacementModel& model() const { return model_; }
  SimRuntime& runtime() { return rt_; }

 private:
  friend class InProcNic;
  TimeNs latency();
  TimeNs placement_delay();
  TimeNs unit_gap();

  SimRuntime& rt_;
  PlacementModel model_;
  std::vector<std::unique_ptr<InProcNic>> nics_;
  // Last delivery time per (from, to) control stream, to keep it FIFO.
  std::vector<TimeNs> control_clock_;
};

}  // namespace loco

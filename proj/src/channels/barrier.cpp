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

#include "loco/channels/barrier.hpp"

namespace loco {

Barrier::Barrier(Manager& m, const std::string& name, std::size_t num_nodes)
    : Channel(m, name), sst_(*this, "sst") {
  if (num_nodes == 0 || num_nodes > m.num_nodes()) {
    throw UsageError("barrier size must be in [1, cluster size]");
  }
  expect_num(num_nodes - 1);
  activate();
}

Barrier::Barrier(Channel& parent, const std::string& name)
    : Channel(parent, name), sst_(*this, "sst") {}

void Barrier::waiting() {
  Manager& m = manager();
  m.fence();
  ++count_;
  sst_.store_mine(count_);
  sst_.push_broadcast();
  Backoff backoff(m.runtime(), 20, 500);
  for (auto* row : sst_.rows()) {
    while (row->load() < count_) backoff.pause();
    backoff.reset();
  }
}

}  // namespace loco

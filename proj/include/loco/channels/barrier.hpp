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

#include <cstdint>

#include "loco/channels/sst.hpp"

namespace loco {

// Network barrier over an SST of epoch counters.
class Barrier : public Channel {
 public:
  Barrier(Manager& m, const std::string& name, std::size_t num_nodes);
  Barrier(Channel& parent, const std::string& name);

  // Global fence, publish the next epoch, then wait for every row to reach it.
  void waiting();

  std::uint64_t epoch() const { return count_; }
  Sst<std::uint64_t>& sst() { return sst_; }

 private:
  Sst<std::uint64_t> sst_;
  std::uint64_t count_ = 0;
};

}  // namespace loco

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

#include <span>
#include <string>

#include "loco/manager.hpp"

namespace loco {

// A symmetric region at every participant, accessed by (node, offset). No
// ordering beyond the fabric's own rules.
class SharedRegion : public Channel {
 public:
  SharedRegion(Manager& m, const std::string& name, std::size_t length);
  SharedRegion(Channel& parent, const std::string& name, std::size_t length);

  std::size_t length() const { return length_; }
  const RegionDesc& desc_at(NodeId node) const { return region_at(node, "data"); }

  AckKey write(NodeId node, std::uint64_t offset, std::span<const std::byte> data);
  AckKey read(NodeId node, std::uint64_t offset, std::span<std::byte> out);
  Bytes read_sync(NodeId node, std::uint64_t offset, std::size_t length);

 private:
  void check(std::uint64_t offset, std::size_t length) const;
  std::size_t length_;
};

}  // namespace loco

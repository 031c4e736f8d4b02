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

#include "loco/channels/shared_region.hpp"

namespace loco {

SharedRegion::SharedRegion(Manager& m, const std::string& name, std::size_t length)
    : Channel(m, name), length_(length) {
  add_region("data", length);
  activate();
}

SharedRegion::SharedRegion(Channel& parent, const std::string& name, std::size_t length)
    : Channel(parent, name), length_(length) {
  add_region("data", length);
}

void SharedRegion::check(std::uint64_t offset, std::size_t length) const {
  if (offset > length_ || length > length_ - offset) {
    throw UsageError("access outside shared region '" + name() + "'");
  }
}

AckKey SharedRegion::write(NodeId node, std::uint64_t offset,
                           std::span<const std::byte> data) {
  check(offset, data.size());
  return manager().write(node, desc_at(node), offset, data);
}

AckKey SharedRegion::read(NodeId node, std::uint64_t offset, std::span<std::byte> out) {
  check(offset, out.size());
  return manager().read(node, desc_at(node), offset, out);
}

Bytes SharedRegion::read_sync(NodeId node, std::uint64_t offset, std::size_t length) {
  Bytes out(length);
  read(node, offset, out).wait();
  return out;
}

}  // namespace loco

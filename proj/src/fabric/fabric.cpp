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

#include "loco/fabric.hpp"

namespace loco {

const char* to_string(VerbKind k) {
  switch (k) {
    case VerbKind::kWrite: return "write";
    case VerbKind::kRead: return "read";
    case VerbKind::kFetchAdd: return "fetch_add";
    case VerbKind::kCompareSwap: return "compare_swap";
    case VerbKind::kZeroLengthRead: return "zero_len_read";
  }
  return "?";
}

const char* to_string(PlacementModel::Delay d) {
  switch (d) {
    case PlacementModel::Delay::kZero: return "zero";
    case PlacementModel::Delay::kExponential: return "exponential";
    case PlacementModel::Delay::kAdversarial: return "adversarial";
  }
  return "?";
}

PlacementModel::Delay parse_delay(const std::string& s) {
  if (s == "zero") return PlacementModel::Delay::kZero;
  if (s == "exponential") return PlacementModel::Delay::kExponential;
  if (s == "adversarial") return PlacementModel::Delay::kAdversarial;
  throw UsageError("unknown placement delay '" + s + "'");
}

PlacementModel PlacementModel::zero() {
  PlacementModel m;
  m.delay = Delay::kZero;
  return m;
}

PlacementModel PlacementModel::adversarial(std::size_t tear) {
  PlacementModel m;
  m.delay = Delay::kAdversarial;
  m.tear_granularity = tear;
  m.unit_gap_ns = 200;
  return m;
}

std::vector<std::pair<std::uint64_t, std::size_t>> split_units(
    std::uint64_t addr, std::size_t len, std::size_t granularity) {
  std::vector<std::pair<std::uint64_t, std::size_t>> units;
  std::uint64_t end = addr + len;
  while (addr < end) {
    std::uint64_t boundary = (addr / granularity + 1) * granularity;
    std::uint64_t stop = std::min<std::uint64_t>(boundary, end);
    units.emplace_back(addr, static_cast<std::size_t>(stop - addr));
    addr = stop;
  }
  return units;
}

void Nic::validate_shape(const VerbRequest& req) {
  switch (req.kind) {
    case VerbKind::kWrite:
      if (req.payload.size() != req.length) {
        throw FabricError("write payload size does not match length");
      }
      [[fallthrough]];
    case VerbKind::kRead:
      if (req.region == nullptr) throw FabricError("verb without target region");
      break;
    case VerbKind::kFetchAdd:
    case VerbKind::kCompareSwap:
      if (req.region == nullptr) throw FabricError("atomic without target region");
      if (req.length != kWordSize) throw FabricError("atomics must be 8 bytes");
      if ((req.region->base + req.offset) % kWordSize != 0) {
        throw FabricError("misaligned atomic at offset " + std::to_string(req.offset));
      }
      break;
    case VerbKind::kZeroLengthRead:
      if (req.length != 0) throw FabricError("zero-length read with nonzero length");
      break;
  }
  if (req.region != nullptr) {
    if (req.region->owner != req.target_node) {
      throw FabricError("region '" + req.region->name + "' is not owned by the target");
    }
    if (req.offset > req.region->length ||
        req.length > req.region->length - req.offset) {
      throw FabricError("access out of bounds of region '" + req.region->name + "'");
    }
  }
}

void Nic::post(QueuePair& qp, VerbRequest req) {
  if (req.target_node != qp.peer()) {
    throw FabricError("verb target does not match the queue pair's peer");
  }
  validate_shape(req);
  do_post(qp, std::move(req));
  ++qp.posted_;
  verbs_posted_.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace loco

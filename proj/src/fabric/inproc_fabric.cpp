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

#include "loco/inproc_fabric.hpp"

#include <cmath>

namespace loco {

namespace {

struct PendingOp {
  VerbRequest req;
  std::uint64_t addr = 0;
  TimeNs arrive_at = 0;
  std::vector<std::pair<std::uint64_t, std::size_t>> units;
  std::size_t next_unit = 0;
  Bytes result;
};

// Ops on one queue pair execute in issue order; a write's packets are placed
// one event at a time, so concurrent observers can see a partial write.
// Verbs already posted stay in flight even if their queue pair is destroyed.
struct QpState {
  std::deque<PendingOp> ops;
  bool stepping = false;
};

class InProcQp final : public QueuePair {
 public:
  using QueuePair::QueuePair;
  std::shared_ptr<QpState> state = std::make_shared<QpState>();
};

}  // namespace

class InProcNic final : public Nic {
 public:
  InProcNic(InProcFabric& fabric, NodeId id, NodeMemory::Config mem)
      : fabric_(fabric), id_(id), memory_(id, mem) {}

  NodeId self() const override { return id_; }
  std::size_t num_nodes() const override { return fabric_.num_nodes(); }
  NodeMemory& memory() override { return memory_; }
  Runtime& runtime() override { return fabric_.rt_; }

  std::unique_ptr<QueuePair> create_qp(NodeId peer, std::uint32_t thread) override {
    if (peer >= fabric_.num_nodes() || peer == id_) {
      throw FabricError("cannot connect node " + std::to_string(id_) + " to " +
                        std::to_string(peer));
    }
    return std::make_unique<InProcQp>(fabric_.rt_, id_, peer, thread);
  }

  std::vector<WorkCompletion> poll() override {
    std::vector<WorkCompletion> out(std::make_move_iterator(cq_.begin()),
                                    std::make_move_iterator(cq_.end()));
    cq_.clear();
    return out;
  }
  WaitQueue& completion_signal() override { return cq_signal_; }
  bool has_completions() override { return !cq_.empty(); }

  void send_control(NodeId peer, Bytes msg) override {
    if (peer >= fabric_.num_nodes()) throw FabricError("unknown control peer");
    auto& clock = fabric_.control_clock_[id_ * fabric_.num_nodes() + peer];
    SimRuntime& rt = fabric_.rt_;
    TimeNs at = rt.now() + fabric_.model_.control_latency_ns +
                static_cast<TimeNs>(rt.uniform(0, fabric_.model_.latency_jitter_ns));
    at = std::max(at, clock + 1);
    clock = at;
    InProcNic* dst = fabric_.nics_[peer].get();
    NodeId from = id_;
    rt.schedule_at(at, [dst, from, msg = std::move(msg)]() mutable {
      dst->inbox_.emplace_back(from, std::move(msg));
      dst->fabric_.rt_.notify_all(dst->inbox_signal_);
    });
  }
  std::optional<std::pair<NodeId, Bytes>> recv_control() override {
    if (inbox_.empty()) return std::nullopt;
    auto m = std::move(inbox_.front());
    inbox_.pop_front();
    return m;
  }
  WaitQueue& control_signal() override { return inbox_signal_; }
  bool has_control() override { return !inbox_.empty(); }

 protected:
  void do_post(QueuePair& base, VerbRequest&& req) override {
    auto qp = static_cast<InProcQp&>(base).state;
    InProcNic& target = *fabric_.nics_.at(req.target_node);
    PendingOp op;
    if (req.region != nullptr) {
      // Descriptor must match what the target actually registered.
      auto live = target.memory_.find(req.region->name);
      if (!live || live->key != req.region->key || live->base != req.region->base) {
        throw FabricError("unknown or stale region '" + req.region->name +
                          "' at node " + std::to_string(req.target_node));
      }
      op.addr = req.region->base + req.offset;
    }
    if (req.kind == VerbKind::kWrite || req.kind == VerbKind::kRead) {
      op.units = split_units(op.addr, req.length, fabric_.model_.tear_granularity);
    }
    SimRuntime& rt = fabric_.rt_;
    op.arrive_at = rt.now() + fabric_.latency();
    if (req.kind == VerbKind::kRead) op.result.resize(req.length);
    bool zero = fabric_.model_.delay == PlacementModel::Delay::kZero;
    if (req.kind == VerbKind::kWrite && !zero) {
      // The ack travels back independently of placement.
      complete_at(op.arrive_at + fabric_.latency(), req, {}, 0);
    }
    op.req = std::move(req);
    qp->ops.push_back(std::move(op));
    if (!qp->stepping) {
      qp->stepping = true;
      schedule_head(qp);
    }
  }

 private:
  void schedule_head(const std::shared_ptr<QpState>& qp) {
    SimRuntime& rt = fabric_.rt_;
    const PendingOp& head = qp->ops.front();
    TimeNs at = std::max(rt.now(), head.arrive_at);
    if (head.req.kind == VerbKind::kWrite) at += fabric_.placement_delay();
    rt.schedule_at(at, [this, qp] { step(qp); });
  }

  void finish_head(const std::shared_ptr<QpState>& qp) {
    qp->ops.pop_front();
    if (qp->ops.empty()) {
      qp->stepping = false;
    } else {
      schedule_head(qp);
    }
  }

  void complete_at(TimeNs at, const VerbRequest& req, Bytes data, std::uint64_t prior) {
    WorkCompletion wc;
    wc.op_id = req.op_id;
    wc.kind = req.kind;
    wc.data = std::move(data);
    wc.prior = prior;
    fabric_.rt_.schedule_at(at, [this, wc = std::move(wc)]() mutable {
      cq_.push_back(std::move(wc));
      fabric_.rt_.notify_all(cq_signal_);
    });
  }

  void step(const std::shared_ptr<QpState>& qp) {
    SimRuntime& rt = fabric_.rt_;
    PendingOp& op = qp->ops.front();
    NodeMemory& mem = fabric_.nics_[op.req.target_node]->memory_;
    switch (op.req.kind) {
      case VerbKind::kWrite:
      case VerbKind::kRead: {
        if (op.next_unit < op.units.size()) {
          auto [addr, len] = op.units[op.next_unit];
          std::size_t rel = addr - op.addr;
          if (op.req.kind == VerbKind::kWrite) {
            mem.store(addr, std::span(op.req.payload).subspan(rel, len));
          } else {
            mem.load(addr, std::span(op.result).subspan(rel, len));
          }
          ++op.next_unit;
          if (op.next_unit < op.units.size()) {
            rt.schedule_at(rt.now() + fabric_.unit_gap(), [this, qp] { step(qp); });
            return;
          }
        }
        if (op.req.kind == VerbKind::kRead) {
          complete_at(rt.now() + fabric_.latency(), op.req, std::move(op.result), 0);
        } else if (fabric_.model_.delay == PlacementModel::Delay::kZero) {
          complete_at(rt.now() + fabric_.latency(), op.req, {}, 0);
        }
        break;
      }
      case VerbKind::kFetchAdd: {
        std::uint64_t prior = mem.fetch_add(op.addr, op.req.operand);
        complete_at(rt.now() + fabric_.latency(), op.req, {}, prior);
        break;
      }
      case VerbKind::kCompareSwap: {
        std::uint64_t prior = mem.compare_swap(op.addr, op.req.operand, op.req.desired);
        complete_at(rt.now() + fabric_.latency(), op.req, {}, prior);
        break;
      }
      case VerbKind::kZeroLengthRead:
        complete_at(rt.now() + fabric_.latency(), op.req, {}, 0);
        break;
    }
    finish_head(qp);
  }

  InProcFabric& fabric_;
  NodeId id_;
  NodeMemory memory_;
  std::deque<WorkCompletion> cq_;
  WaitQueue cq_signal_;
  std::deque<std::pair<NodeId, Bytes>> inbox_;
  WaitQueue inbox_signal_;
};

InProcFabric::InProcFabric(SimRuntime& rt, std::size_t num_nodes,
                           PlacementModel model, NodeMemory::Config memory)
    : rt_(rt), model_(model), control_clock_(num_nodes * num_nodes, 0) {
  if (model_.tear_granularity == 0 || model_.tear_granularity % kWordSize != 0) {
    throw UsageError("tear granularity must be a positive multiple of 8");
  }
  for (NodeId i = 0; i < num_nodes; ++i) {
    nics_.push_back(std::make_unique<InProcNic>(*this, i, memory));
  }
}

InProcFabric::~InProcFabric() = default;

Nic& InProcFabric::nic(NodeId id) { return *nics_.at(id); }

TimeNs InProcFabric::latency() {
  return model_.latency_ns + static_cast<TimeNs>(rt_.uniform(0, model_.latency_jitter_ns));
}

TimeNs InProcFabric::placement_delay() {
  switch (model_.delay) {
    case PlacementModel::Delay::kZero:
      return 0;
    case PlacementModel::Delay::kExponential: {
      double u = rt_.uniform01();
      return static_cast<TimeNs>(-std::log1p(-u) * static_cast<double>(model_.mean_delay_ns));
    }
    case PlacementModel::Delay::kAdversarial:
      if (rt_.uniform(0, 1) == 0) return 0;
      return static_cast<TimeNs>(
          rt_.uniform(model_.mean_delay_ns, 10 * model_.mean_delay_ns));
  }
  return 0;
}

TimeNs InProcFabric::unit_gap() {
  if (model_.delay == PlacementModel::Delay::kAdversarial) {
    return static_cast<TimeNs>(rt_.uniform(0, model_.unit_gap_ns * 10));
  }
  return static_cast<TimeNs>(rt_.uniform(model_.unit_gap_ns / 2, model_.unit_gap_ns * 2));
}

}  // namespace loco

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

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "loco/inproc_fabric.hpp"
#include "loco/manager.hpp"
#include "loco/os_runtime.hpp"
#include "loco/sim_runtime.hpp"
#include "loco/socket_fabric.hpp"

namespace loco::harness {

// The nodes one process drives, whatever the backend.
class Cluster {
 public:
  virtual ~Cluster() = default;
  virtual std::size_t size() const = 0;
  virtual std::vector<NodeId> local_nodes() const = 0;
  virtual Runtime& runtime() = 0;
  virtual Manager& mgr(NodeId id) = 0;
  virtual void spawn(NodeId node, const std::string& name, std::function<void()> body) = 0;
  virtual void run() = 0;
};

// N simulated nodes, each with a manager, over one in-process fabric.
class SimCluster final : public Cluster {
 public:
  struct Options {
    std::size_t nodes = 2;
    std::uint64_t seed = 1;
    PlacementModel model{};
    std::size_t window = kDefaultWindow;
    TimeNs time_limit_ns = 3'600'000'000'000;
    NodeMemory::Config memory{};
  };

  explicit SimCluster(Options options);
  ~SimCluster() override;

  std::size_t size() const override { return managers_.size(); }
  std::vector<NodeId> local_nodes() const override;
  Runtime& runtime() override { return *rt_; }
  SimRuntime& rt() { return *rt_; }
  InProcFabric& fabric() { return *fabric_; }
  Manager& mgr(NodeId id) override { return *managers_.at(id); }
  const Options& options() const { return options_; }

  void spawn(NodeId node, const std::string& name, std::function<void()> body) override;
  // Spawns one task per node running body(manager).
  void spawn_all(const std::string& name, const std::function<void(Manager&)>& body);
  void run() override { rt_->run(); }

 private:
  Options options_;
  std::unique_ptr<SimRuntime> rt_;
  std::unique_ptr<InProcFabric> fabric_;
  std::vector<std::unique_ptr<Manager>> managers_;
};

// Nodes over the socket backend on OS threads. With no hosts file, all nodes
// live in this process on loopback ports; otherwise only node_id does.
class SocketCluster final : public Cluster {
 public:
  struct Options {
    std::size_t nodes = 2;
    std::string hosts_file;
    NodeId node_id = 0;
    std::size_t window = kDefaultWindow;
    NodeMemory::Config memory{};
  };

  explicit SocketCluster(Options options);
  ~SocketCluster() override;

  std::size_t size() const override { return total_; }
  std::vector<NodeId> local_nodes() const override;
  Runtime& runtime() override { return rt_; }
  OsRuntime& rt() { return rt_; }
  Manager& mgr(NodeId id) override;
  void spawn(NodeId node, const std::string& name, std::function<void()> body) override;
  void run() override { rt_.join_workers(); }

 private:
  OsRuntime rt_;
  std::size_t total_ = 0;
  std::map<NodeId, std::unique_ptr<SocketNic>> nics_;
  std::map<NodeId, std::unique_ptr<Manager>> managers_;
};

}  // namespace loco::harness

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

#include "loco/harness/cluster.hpp"

namespace loco::harness {

SimCluster::SimCluster(Options options) : options_(options) {
  SimRuntime::Config rc;
  rc.seed = options_.seed;
  rc.time_limit_ns = options_.time_limit_ns;
  rt_ = std::make_unique<SimRuntime>(rc);
  fabric_ = std::make_unique<InProcFabric>(*rt_, options_.nodes, options_.model,
                                           options_.memory);
  ManagerConfig mc;
  mc.window = options_.window;
  for (NodeId i = 0; i < options_.nodes; ++i) {
    managers_.push_back(std::make_unique<Manager>(fabric_->nic(i),
                                                  local_hosts(options_.nodes, i), mc));
  }
}

SimCluster::~SimCluster() {
  rt_->discard_tasks();
  managers_.clear();
}

void SimCluster::spawn(NodeId node, const std::string& name, std::function<void()> body) {
  rt_->spawn("n" + std::to_string(node) + "/" + name, std::move(body));
}

void SimCluster::spawn_all(const std::string& name,
                           const std::function<void(Manager&)>& body) {
  for (NodeId i = 0; i < size(); ++i) {
    Manager* m = managers_[i].get();
    spawn(i, name, [m, body] { body(*m); });
  }
}

std::vector<NodeId> SimCluster::local_nodes() const {
  std::vector<NodeId> out(managers_.size());
  for (NodeId i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

SocketCluster::SocketCluster(Options options) {
  ManagerConfig mc;
  mc.window = options.window;
  if (options.hosts_file.empty()) {
    total_ = options.nodes;
    HostsMap hosts;
    std::vector<int> fds;
    for (NodeId i = 0; i < total_; ++i) {
      auto [fd, port] = SocketNic::listen_loopback();
      fds.push_back(fd);
      hosts.entries[i] = "127.0.0.1:" + std::to_string(port);
    }
    for (NodeId i = 0; i < total_; ++i) {
      hosts.self = i;
      nics_[i] = std::make_unique<SocketNic>(rt_, hosts, options.memory, fds[i]);
      managers_[i] = std::make_unique<Manager>(*nics_[i], hosts, mc);
    }
  } else {
    HostsMap hosts = load_hosts(options.hosts_file, options.node_id);
    total_ = hosts.size();
    nics_[options.node_id] = std::make_unique<SocketNic>(rt_, hosts, options.memory);
    managers_[options.node_id] = std::make_unique<Manager>(*nics_[options.node_id], hosts, mc);
  }
}

SocketCluster::~SocketCluster() {
  try {
    rt_.join_workers();
  } catch (...) {
  }
  rt_.shutdown();
  managers_.clear();
  nics_.clear();
}

std::vector<NodeId> SocketCluster::local_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [id, m] : managers_) out.push_back(id);
  return out;
}

Manager& SocketCluster::mgr(NodeId id) {
  auto it = managers_.find(id);
  if (it == managers_.end()) throw UsageError("node " + std::to_string(id) + " is not local");
  return *it->second;
}

void SocketCluster::spawn(NodeId node, const std::string& name, std::function<void()> body) {
  mgr(node);
  rt_.spawn("n" + std::to_string(node) + "/" + name, std::move(body));
}

}  // namespace loco::harness

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

#include <map>
#include <memory>
#include <shared_mutex>
#include <vector>

#include "loco/channels/owned_var.hpp"

namespace loco {

// Shared state table: one owned_var row per participant. The self row is
// created up front; a peer's row is added when that peer joins.
template <typename T>
class Sst : public Channel {
 public:
  using Row = OwnedVar<T>;

  Sst(Manager& m, const std::string& name) : Channel(m, name) {
    init();
    activate();
  }
  Sst(Channel& parent, const std::string& name) : Channel(parent, name) { init(); }

  Row& mine() { return *mine_; }
  void store_mine(const T& v) { mine_->store_mine(v); }
  AckKey push_broadcast() { return mine_->push_broadcast(); }
  AckKey push(NodeId peer) { return mine_->push(peer); }

  // Snapshot of all rows in node order, self included.
  std::vector<Row*> rows() const {
    std::shared_lock lock(rows_mu_);
    std::vector<Row*> out;
    for (const auto& [id, row] : rows_) out.push_back(row.get());
    return out;
  }
  Row& row(NodeId n) const {
    std::shared_lock lock(rows_mu_);
    auto it = rows_.find(n);
    if (it == rows_.end()) {
      throw UsageError("sst '" + name() + "' has no row for node " + std::to_string(n));
    }
    return *it->second;
  }
  bool has_row(NodeId n) const {
    std::shared_lock lock(rows_mu_);
    return rows_.contains(n);
  }
  std::size_t size() const {
    std::shared_lock lock(rows_mu_);
    return rows_.size();
  }

 protected:
  // Each peer must hold a copy of our row for us to push into.
  void expected_from(NodeId peer, std::vector<std::string>& out) const override {
    Channel::expected_from(peer, out);
    out.push_back(mine_->data_region());
  }

 private:
  void init() {
    mine_ = add_row(self());
    on_join([this](NodeId p) { add_row(p); });
    on_connect([this](NodeId p) { add_row(p); });
  }
  Row* add_row(NodeId n) {
    {
      std::shared_lock lock(rows_mu_);
      if (auto it = rows_.find(n); it != rows_.end()) return it->second.get();
    }
    auto row = std::make_unique<Row>(*this, "ov" + std::to_string(n), n, false);
    std::unique_lock lock(rows_mu_);
    return rows_.emplace(n, std::move(row)).first->second.get();
  }

  mutable std::shared_mutex rows_mu_;
  std::map<NodeId, std::unique_ptr<Row>> rows_;
  Row* mine_ = nullptr;
};

}  // namespace loco

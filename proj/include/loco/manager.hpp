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

#include <atomic>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "loco/common.hpp"
#include "loco/completion.hpp"
#include "loco/consistency.hpp"
#include "loco/fabric.hpp"

namespace loco {

struct HostsMap {
  NodeId self = 0;
  std::map<NodeId, std::string> entries;

  std::size_t size() const { return entries.size(); }
};

// Parses "<id> <address>" lines; '#' starts a comment. Throws SetupError on
// duplicate or non-dense ids, or when self is absent.
HostsMap parse_hosts(std::istream& in, NodeId self);
HostsMap load_hosts(const std::string& path, NodeId self);
HostsMap local_hosts(std::size_t num_nodes, NodeId self);

namespace control {

enum class MsgType : std::uint8_t { kJoin = 1, kConnect = 2, kError = 3 };

struct RegionEntry {
  std::string name;
  std::uint64_t base = 0;
  std::uint64_t length = 0;
  std::uint64_t key = 0;
};

struct Message {
  MsgType type = MsgType::kJoin;
  std::string channel;
  std::vector<RegionEntry> regions;
};

inline constexpr std::uint32_t kMagic = 0x4C4F434D;

Bytes encode(const Message& m);
// Throws FabricError on a malformed frame.
Message decode(std::span<const std::byte> frame);

}  // namespace control

class Manager;

// Node-local endpoint of a named cross-node object. A channel owns its
// regions and sub-channels; a sub-channel's name is "<parent>/<name>" and a
// region's name is "<channel>.<component>".
class Channel {
 public:
  using PeerCallback = std::function<void(NodeId)>;

  Channel(Manager& manager, std::string name);
  Channel(Channel& parent, const std::string& name);
  virtual ~Channel();
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  const std::string& name() const { return name_; }
  Manager& manager() const { return manager_; }
  Channel* parent() const { return parent_; }
  Channel& root();
  bool is_root() const { return parent_ == nullptr; }
  NodeId self() const;
  std::size_t num_nodes() const;

  // Readiness: ready once `n` peers have connected (root channels only).
  void expect_num(std::size_t n);
  std::size_t expected() const { return expected_; }
  std::size_t connected_count() const;
  std::vector<NodeId> connected_peers() const;
  bool is_connected(NodeId peer) const;
  bool ready() const;
  std::string error() const;

  // Run on the manager's control agent, once per peer.
  void on_join(PeerCallback cb);
  void on_connect(PeerCallback cb);

  std::string region_name(const std::string& component) const {
    return name_ + "." + component;
  }
  // Registers "<name>.<component>". Symmetric regions are expected at every
  // peer under the same name and are requested during the handshake.
  const RegionDesc& add_region(const std::string& component, std::size_t length,
                               bool symmetric = true);
  // As add_region, but with a full name, which must lie in this channel's
  // namespace.
  const RegionDesc& add_named_region(const std::string& full_name, std::size_t length,
                                     bool symmetric);
  const RegionDesc& local_region(const std::string& component) const;
  // Local descriptor for self, otherwise the descriptor the peer sent.
  const RegionDesc& region_at(NodeId node, const std::string& component) const;

  std::vector<Channel*> children() const;
  std::vector<std::string> owned_region_names() const;

 protected:
  // Root channels call this once fully constructed.
  void activate();
  // Regions this node expects `peer` to provide for this channel.
  virtual void expected_from(NodeId peer, std::vector<std::string>& out) const;

 private:
  friend class Manager;
  void add_child(Channel* c);
  void remove_child(Channel* c);
  void collect(std::vector<Channel*>& out);

  Manager& manager_;
  Channel* parent_ = nullptr;
  std::string name_;
  std::size_t expected_;
  bool active_ = false;

  mutable std::mutex mu_;
  std::vector<Channel*> children_;
  std::vector<std::string> symmetric_;
  std::map<std::string, RegionDesc, std::less<>> local_;
  std::vector<PeerCallback> join_cbs_;
  std::vector<PeerCallback> connect_cbs_;

  // Handshake state, root channels only; guarded by mu_.
  std::set<NodeId> joined_;
  std::set<NodeId> connected_;
  std::set<NodeId> join_resent_;
  std::string error_;
};

struct ManagerConfig {
  std::size_t window = kDefaultWindow;
  TimeNs ready_timeout_ns = 10'000'000'000;
};

// Per application task state: a completion window, one queue pair per peer
// and the unfenced-write ledger.
struct ThreadState {
  std::uint16_t id = 0;
  ThreadWindow* window = nullptr;
  std::vector<std::unique_ptr<QueuePair>> qps;
  std::vector<LedgerEntry> ledger;
  std::uint64_t remote_verbs = 0;
};

class Manager {
 public:
  Manager(Nic& nic, HostsMap hosts, ManagerConfig config = {});
  ~Manager();
  Manager(const Manager&) = delete;
  Manager& operator=(const Manager&) = delete;

  NodeId self() const { return nic_.self(); }
  std::size_t num_nodes() const { return nic_.num_nodes(); }
  std::vector<NodeId> peers() const;
  const HostsMap& hosts() const { return hosts_; }
  Nic& nic() { return nic_; }
  NodeMemory& memory() { return nic_.memory(); }
  Runtime& runtime() { return rt_; }
  CompletionTracker& tracker() { return tracker_; }
  const ManagerConfig& config() const { return config_; }

  // Blocks until every registered channel is ready. Throws TimeoutError
  // naming the unready channels, or SetupError if a handshake failed.
  void wait_for_ready();
  void wait_for_ready(TimeNs timeout_ns);
  bool all_ready() const;
  Channel* find_channel(const std::string& name) const;

  // The calling task's state, created on first use.
  ThreadState& thread();
  // Window size for tasks that bind later.
  void set_window(std::size_t window);

  // One-sided access. When node == self these are plain local accesses and
  // the returned key is empty.
  AckKey write(NodeId node, const RegionDesc& r, std::uint64_t offset,
               std::span<const std::byte> data);
  AckKey read(NodeId node, const RegionDesc& r, std::uint64_t offset,
              std::span<std::byte> out);
  AckKey fetch_add_async(NodeId node, const RegionDesc& r, std::uint64_t offset,
                         std::uint64_t delta, std::uint64_t* prior);
  AckKey compare_swap_async(NodeId node, const RegionDesc& r, std::uint64_t offset,
                            std::uint64_t expected, std::uint64_t desired,
                            std::uint64_t* prior);
  std::uint64_t fetch_add(NodeId node, const RegionDesc& r, std::uint64_t offset,
                          std::uint64_t delta);
  std::uint64_t compare_swap(NodeId node, const RegionDesc& r, std::uint64_t offset,
                             std::uint64_t expected, std::uint64_t desired);

  void fence(FenceScope scope = FenceScope::global());
  // Test-only: turns every fence into a no-op.
  void set_fences_enabled(bool on) { fences_enabled_.store(on); }
  bool fences_enabled() const { return fences_enabled_.load(); }
  FenceStats fence_stats() const;
  // Ledger view for tests: (thread, peer) pairs with unfenced writes.
  std::vector<std::pair<std::uint16_t, NodeId>> unfenced() const;

  const RegionDesc& remote_region(NodeId peer, const std::string& name) const;
  const RegionDesc* find_remote_region(NodeId peer, const std::string& name) const;

 private:
  friend class Channel;
  void register_channel(Channel& root);
  void unregister_channel(Channel& root);
  void send_join(Channel& root, NodeId peer);
  void control_loop();
  void poll_loop();
  void handle(NodeId from, control::Message msg);
  void handle_join(NodeId from, Channel& root, const control::Message& msg);
  void handle_connect(NodeId from, Channel& root, const control::Message& msg);
  void handle_error(NodeId from, Channel& root, const control::Message& msg);
  void fail_channel(Channel& root, NodeId peer, const std::string& why, bool notify_peer);
  void notify_ready() { rt_.notify_all(ready_signal_); }

  QueuePair& qp(ThreadState& ts, NodeId peer);
  AckKey post(ThreadState& ts, VerbRequest req, ResultSink sink);
  std::vector<ThreadState*> thread_snapshot() const;

  Nic& nic_;
  Runtime& rt_;
  HostsMap hosts_;
  ManagerConfig config_;
  const void* binding_key_;
  CompletionTracker tracker_;
  WaitQueue ready_signal_;

  mutable std::mutex channels_mu_;
  std::map<std::string, Channel*, std::less<>> channels_;
  bool latched_ = false;

  mutable std::shared_mutex remote_mu_;
  std::map<std::pair<NodeId, std::string>, std::unique_ptr<RegionDesc>, std::less<>>
      remote_;

  mutable std::mutex threads_mu_;
  std::vector<std::unique_ptr<ThreadState>> threads_;
  std::size_t window_;

  std::atomic<bool> fences_enabled_{true};
  std::atomic<std::uint64_t> fences_{0};
  std::atomic<std::uint64_t> flush_reads_{0};
  std::atomic<std::uint64_t> fences_skipped_{0};
};

}  // namespace loco

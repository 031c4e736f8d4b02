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

#include "loco/manager.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace loco {

namespace {

std::atomic<std::uintptr_t> next_binding{1};

bool in_namespace(const std::string& name, const std::string& channel) {
  if (name.size() <= channel.size() || name.compare(0, channel.size(), channel) != 0) {
    return false;
  }
  char sep = name[channel.size()];
  return sep == '.' || sep == '/';
}

void check_channel_name(const std::string& name) {
  if (name.empty() || name.find('.') != std::string::npos) {
    throw UsageError("invalid channel name '" + name + "'");
  }
}

}  // namespace

HostsMap parse_hosts(std::istream& in, NodeId self) {
  HostsMap hosts;
  hosts.self = self;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    long long id;
    std::string addr, extra;
    if (!(fields >> id)) {
      std::istringstream probe(line);
      std::string any;
      if (probe >> any) {
        throw SetupError("hosts line " + std::to_string(lineno) + ": bad node id");
      }
      continue;
    }
    if (!(fields >> addr) || (fields >> extra) || id < 0) {
      throw SetupError("hosts line " + std::to_string(lineno) +
                       ": expected '<id> <address>'");
    }
    if (!hosts.entries.emplace(static_cast<NodeId>(id), addr).second) {
      throw SetupError("duplicate node id " + std::to_string(id) + " in hosts");
    }
  }
  NodeId expect = 0;
  for (const auto& [id, addr] : hosts.entries) {
    if (id != expect++) throw SetupError("node ids in hosts must be dense from 0");
  }
  if (!hosts.entries.contains(self)) {
    throw SetupError("hosts map does not contain self id " + std::to_string(self));
  }
  return hosts;
}

HostsMap load_hosts(const std::string& path, NodeId self) {
  std::ifstream in(path);
  if (!in) throw SetupError("cannot open hosts file '" + path + "'");
  return parse_hosts(in, self);
}

HostsMap local_hosts(std::size_t num_nodes, NodeId self) {
  HostsMap hosts;
  hosts.self = self;
  for (NodeId i = 0; i < num_nodes; ++i) hosts.entries[i] = "node" + std::to_string(i);
  if (!hosts.entries.contains(self)) throw SetupError("self id outside cluster");
  return hosts;
}

namespace control {

namespace {

template <typename T>
void put(Bytes& out, T v) {
  auto b = as_bytes_of(v);
  out.insert(out.end(), b.begin(), b.end());
}

void put_str(Bytes& out, const std::string& s) {
  if (s.size() > 0xffff) throw UsageError("name too long for control frame");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  auto b = std::as_bytes(std::span(s));
  out.insert(out.end(), b.begin(), b.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = load_as<T>(in_, pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    auto n = get<std::uint16_t>();
    need(n);
    std::string s = to_string(in_.subspan(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) throw FabricError("truncated control frame");
  }
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes encode(const Message& m) {
  Bytes out;
  put<std::uint32_t>(out, kMagic);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(m.type));
  put_str(out, m.channel);
  if (m.regions.size() > 0xffff) throw UsageError("too many regions in control frame");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(m.regions.size()));
  for (const auto& r : m.regions) {
    put_str(out, r.name);
    put<std::uint64_t>(out, r.base);
    put<std::uint64_t>(out, r.length);
    put<std::uint64_t>(out, r.key);
  }
  return out;
}

Message decode(std::span<const std::byte> frame) {
  Reader r(frame);
  if (r.get<std::uint32_t>() != kMagic) throw FabricError("bad control frame magic");
  Message m;
  auto type = r.get<std::uint8_t>();
  if (type < 1 || type > 3) throw FabricError("unknown control message type");
  m.type = static_cast<MsgType>(type);
  m.channel = r.str();
  auto count = r.get<std::uint16_t>();
  for (std::uint16_t i = 0; i < count; ++i) {
    RegionEntry e;
    e.name = r.str();
    e.base = r.get<std::uint64_t>();
    e.length = r.get<std::uint64_t>();
    e.key = r.get<std::uint64_t>();
    m.regions.push_back(std::move(e));
  }
  if (!r.done()) throw FabricError("trailing bytes in control frame");
  return m;
}

}  // namespace control

// ---------------------------------------------------------------------------
// Channel

Channel::Channel(Manager& manager, std::string name)
    : manager_(manager), name_(std::move(name)),
      expected_(manager.num_nodes() - 1) {
  check_channel_name(name_);
}

Channel::Channel(Channel& parent, const std::string& name)
    : manager_(parent.manager_), parent_(&parent), name_(parent.name_ + "/" + name),
      expected_(0) {
  check_channel_name(name);
  parent.add_child(this);
}

Channel::~Channel() {
  if (parent_ != nullptr) {
    parent_->remove_child(this);
  } else if (active_) {
    manager_.unregister_channel(*this);
  }
}

Channel& Channel::root() {
  Channel* c = this;
  while (c->parent_ != nullptr) c = c->parent_;
  return *c;
}

NodeId Channel::self() const { return manager_.self(); }
std::size_t Channel::num_nodes() const { return manager_.num_nodes(); }

void Channel::expect_num(std::size_t n) {
  if (!is_root()) throw UsageError("expect_num applies to root channels");
  if (n >= manager_.num_nodes()) {
    throw UsageError("expect_num(" + std::to_string(n) + ") exceeds peer count");
  }
  expected_ = n;
}

std::size_t Channel::connected_count() const {
  const Channel* r = this;
  while (r->parent_ != nullptr) r = r->parent_;
  std::lock_guard lock(r->mu_);
  return r->connected_.size();
}

std::vector<NodeId> Channel::connected_peers() const {
  const Channel* r = this;
  while (r->parent_ != nullptr) r = r->parent_;
  std::lock_guard lock(r->mu_);
  return {r->connected_.begin(), r->connected_.end()};
}

bool Channel::is_connected(NodeId peer) const {
  const Channel* r = this;
  while (r->parent_ != nullptr) r = r->parent_;
  std::lock_guard lock(r->mu_);
  return r->connected_.contains(peer);
}

bool Channel::ready() const {
  const Channel* r = this;
  while (r->parent_ != nullptr) r = r->parent_;
  std::lock_guard lock(r->mu_);
  return r->error_.empty() && r->connected_.size() >= r->expected_;
}

std::string Channel::error() const {
  const Channel* r = this;
  while (r->parent_ != nullptr) r = r->parent_;
  std::lock_guard lock(r->mu_);
  return r->error_;
}

void Channel::on_join(PeerCallback cb) {
  std::lock_guard lock(mu_);
  join_cbs_.push_back(std::move(cb));
}

void Channel::on_connect(PeerCallback cb) {
  std::lock_guard lock(mu_);
  connect_cbs_.push_back(std::move(cb));
}

const RegionDesc& Channel::add_region(const std::string& component, std::size_t length,
                                      bool symmetric) {
  return add_named_region(region_name(component), length, symmetric);
}

const RegionDesc& Channel::add_named_region(const std::string& full_name,
                                            std::size_t length, bool symmetric) {
  if (full_name.size() <= name_.size() + 1 ||
      full_name.compare(0, name_.size() + 1, name_ + ".") != 0) {
    throw SetupError("region '" + full_name + "' lies outside channel '" + name_ + "'");
  }
  RegionDesc d = manager_.memory().register_region(full_name, length);
  std::lock_guard lock(mu_);
  if (symmetric) symmetric_.push_back(full_name);
  return local_.emplace(full_name, std::move(d)).first->second;
}

const RegionDesc& Channel::local_region(const std::string& component) const {
  std::lock_guard lock(mu_);
  auto it = local_.find(region_name(component));
  if (it == local_.end()) {
    throw UsageError("channel '" + name_ + "' has no region '" + component + "'");
  }
  return it->second;
}

const RegionDesc& Channel::region_at(NodeId node, const std::string& component) const {
  if (node == self()) return local_region(component);
  return manager_.remote_region(node, region_name(component));
}

std::vector<Channel*> Channel::children() const {
  std::lock_guard lock(mu_);
  return children_;
}

std::vector<std::string> Channel::owned_region_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [n, d] : local_) out.push_back(n);
  return out;
}

void Channel::activate() {
  if (!is_root()) throw UsageError("only root channels are registered");
  if (active_) return;
  manager_.register_channel(*this);
  active_ = true;
}

void Channel::expected_from(NodeId, std::vector<std::string>& out) const {
  std::lock_guard lock(mu_);
  out.insert(out.end(), symmetric_.begin(), symmetric_.end());
}

void Channel::add_child(Channel* c) {
  std::lock_guard lock(mu_);
  children_.push_back(c);
}

void Channel::remove_child(Channel* c) {
  std::lock_guard lock(mu_);
  std::erase(children_, c);
}

void Channel::collect(std::vector<Channel*>& out) {
  out.push_back(this);
  for (Channel* c : children()) c->collect(out);
}

// ---------------------------------------------------------------------------
// Manager

Manager::Manager(Nic& nic, HostsMap hosts, ManagerConfig config)
    : nic_(nic),
      rt_(nic.runtime()),
      hosts_(std::move(hosts)),
      config_(config),
      binding_key_(reinterpret_cast<const void*>(next_binding.fetch_add(1))),
      tracker_(rt_),
      window_(config.window) {
  if (hosts_.size() != nic_.num_nodes()) {
    throw SetupError("hosts map has " + std::to_string(hosts_.size()) +
                     " nodes but the fabric has " + std::to_string(nic_.num_nodes()));
  }
  if (hosts_.self != nic_.self()) throw SetupError("hosts self id does not match the nic");
  if (window_ == 0 || window_ > kMaxWindow) throw UsageError("bad window size");
  std::string id = std::to_string(self());
  rt_.spawn("poller-" + id, [this] { poll_loop(); }, TaskKind::kDaemon);
  rt_.spawn("control-" + id, [this] { control_loop(); }, TaskKind::kDaemon);
}

Manager::~Manager() = default;

std::vector<NodeId> Manager::peers() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < num_nodes(); ++i) {
    if (i != self()) out.push_back(i);
  }
  return out;
}

void Manager::register_channel(Channel& root) {
  {
    std::lock_guard lock(channels_mu_);
    if (latched_) {
      throw UsageError("channel '" + root.name() +
                       "' registered after wait_for_ready; late joiners are rejected");
    }
    if (!channels_.emplace(root.name(), &root).second) {
      throw UsageError("duplicate channel name '" + root.name() + "'");
    }
    for (NodeId p : peers()) send_join(root, p);
  }
  notify_ready();
}

void Manager::unregister_channel(Channel& root) {
  std::lock_guard lock(channels_mu_);
  auto it = channels_.find(root.name());
  if (it != channels_.end() && it->second == &root) channels_.erase(it);
}

Channel* Manager::find_channel(const std::string& name) const {
  std::lock_guard lock(channels_mu_);
  auto it = channels_.find(name);
  return it == channels_.end() ? nullptr : it->second;
}

void Manager::send_join(Channel& root, NodeId peer) {
  std::vector<Channel*> tree;
  root.collect(tree);
  std::vector<std::string> names;
  for (Channel* c : tree) c->expected_from(peer, names);
  control::Message m;
  m.type = control::MsgType::kJoin;
  m.channel = root.name();
  for (auto& n : names) m.regions.push_back({std::move(n), 0, 0, 0});
  nic_.send_control(peer, control::encode(m));
}

bool Manager::all_ready() const {
  std::lock_guard lock(channels_mu_);
  return std::all_of(channels_.begin(), channels_.end(),
                     [](const auto& kv) { return kv.second->ready(); });
}

void Manager::wait_for_ready() { wait_for_ready(config_.ready_timeout_ns); }

void Manager::wait_for_ready(TimeNs timeout_ns) {
  TimeNs deadline = timeout_ns >= kForever - rt_.now() ? kForever : rt_.now() + timeout_ns;
  auto failed = [this] {
    std::lock_guard lock(channels_mu_);
    return std::any_of(channels_.begin(), channels_.end(),
                       [](const auto& kv) { return !kv.second->error().empty(); });
  };
  rt_.wait(ready_signal_, [&] { return all_ready() || failed(); }, deadline);
  std::lock_guard lock(channels_mu_);
  std::string errors, unready;
  for (const auto& [name, ch] : channels_) {
    if (auto e = ch->error(); !e.empty()) errors += " '" + name + "': " + e + ";";
    if (!ch->ready()) unready += " '" + name + "'";
  }
  if (!errors.empty()) throw SetupError("handshake failed:" + errors);
  if (!unready.empty()) throw TimeoutError("channels not ready:" + unready);
  latched_ = true;
}

void Manager::control_loop() {
  while (true) {
    rt_.wait(nic_.control_signal(), [this] { return nic_.has_control() || rt_.stopping(); });
    if (rt_.stopping()) return;
    while (auto msg = nic_.recv_control()) {
      control::Message m;
      try {
        m = control::decode(msg->second);
      } catch (const FabricError&) {
        continue;  // not ours to act on
      }
      handle(msg->first, std::move(m));
    }
    notify_ready();
  }
}

void Manager::poll_loop() {
  while (true) {
    rt_.wait(nic_.completion_signal(),
             [this] { return nic_.has_completions() || rt_.stopping(); });
    if (!nic_.has_completions() && rt_.stopping()) return;
    for (WorkCompletion& wc : nic_.poll()) tracker_.complete(wc);
    tracker_.signal_progress();
  }
}

void Manager::handle(NodeId from, control::Message msg) {
  std::lock_guard lock(channels_mu_);
  auto it = channels_.find(msg.channel);
  if (it == channels_.end()) return;  // this node does not take part
  Channel& root = *it->second;
  switch (msg.type) {
    case control::MsgType::kJoin: handle_join(from, root, msg); break;
    case control::MsgType::kConnect: handle_connect(from, root, msg); break;
    case control::MsgType::kError: handle_error(from, root, msg); break;
  }
}

void Manager::handle_join(NodeId from, Channel& root, const control::Message& msg) {
  bool first;
  {
    std::lock_guard lock(root.mu_);
    first = root.joined_.insert(from).second;
  }
  if (first) {
    std::vector<Channel*> tree;
    root.collect(tree);
    try {
      for (Channel* c : tree) {
        std::vector<Channel::PeerCallback> cbs;
        {
          std::lock_guard lock(c->mu_);
          cbs = c->join_cbs_;
        }
        for (auto& cb : cbs) cb(from);
      }
    } catch (const std::exception& e) {
      fail_channel(root, from, std::string("join callback failed: ") + e.what(), true);
      return;
    }
  }
  control::Message reply;
  reply.type = control::MsgType::kConnect;
  reply.channel = root.name();
  std::string missing;
  for (const auto& want : msg.regions) {
    std::optional<RegionDesc> d;
    if (in_namespace(want.name, root.name())) d = memory().find(want.name);
    if (!d) {
      missing += " " + want.name;
      continue;
    }
    reply.regions.push_back({d->name, d->base, d->length, d->key});
  }
  if (!missing.empty()) {
    fail_channel(root, from, "region list mismatch, missing:" + missing, true);
    return;
  }
  nic_.send_control(from, control::encode(reply));
  bool resend = false;
  {
    std::lock_guard lock(root.mu_);
    if (!root.connected_.contains(from) && root.join_resent_.insert(from).second) {
      resend = true;
    }
  }
  if (resend) send_join(root, from);
}

void Manager::handle_connect(NodeId from, Channel& root, const control::Message& msg) {
  {
    std::lock_guard lock(root.mu_);
    if (root.connected_.contains(from) || !root.error_.empty()) return;
  }
  {
    std::unique_lock lock(remote_mu_);
    for (const auto& e : msg.regions) {
      RegionDesc d{from, e.name, e.base, e.length, e.key};
      auto& slot = remote_[{from, e.name}];
      if (slot) {
        *slot = d;
      } else {
        slot = std::make_unique<RegionDesc>(d);
      }
    }
  }
  std::vector<Channel*> tree;
  root.collect(tree);
  try {
    for (Channel* c : tree) {
      std::vector<Channel::PeerCallback> cbs;
      {
        std::lock_guard lock(c->mu_);
        cbs = c->connect_cbs_;
      }
      for (auto& cb : cbs) cb(from);
    }
  } catch (const std::exception& e) {
    fail_channel(root, from, std::string("connect callback failed: ") + e.what(), true);
    return;
  }
  std::lock_guard lock(root.mu_);
  root.connected_.insert(from);
}

void Manager::handle_error(NodeId from, Channel& root, const control::Message& msg) {
  std::string detail;
  for (const auto& r : msg.regions) detail += " " + r.name;
  fail_channel(root, from,
               "peer " + std::to_string(from) + " rejected the handshake:" + detail, false);
}

void Manager::fail_channel(Channel& root, NodeId peer, const std::string& why,
                           bool notify_peer) {
  {
    std::lock_guard lock(root.mu_);
    if (root.error_.empty()) root.error_ = why;
  }
  if (notify_peer) {
    control::Message m;
    m.type = control::MsgType::kError;
    m.channel = root.name();
    m.regions.push_back({why, 0, 0, 0});
    nic_.send_control(peer, control::encode(m));
  }
}

const RegionDesc* Manager::find_remote_region(NodeId peer, const std::string& name) const {
  std::shared_lock lock(remote_mu_);
  auto it = remote_.find(std::pair<NodeId, std::string>{peer, name});
  return it == remote_.end() ? nullptr : it->second.get();
}

const RegionDesc& Manager::remote_region(NodeId peer, const std::string& name) const {
  if (const RegionDesc* d = find_remote_region(peer, name)) return *d;
  throw UsageError("no descriptor for region '" + name + "' at node " +
                   std::to_string(peer));
}

// ---------------------------------------------------------------------------
// Threads and verbs

void Manager::set_window(std::size_t window) {
  if (window == 0 || window > kMaxWindow) throw UsageError("bad window size");
  std::lock_guard lock(threads_mu_);
  window_ = window;
}

ThreadState& Manager::thread() {
  TaskLocal& tl = rt_.task_local();
  if (void* p = tl.find(binding_key_)) return *static_cast<ThreadState*>(p);
  auto ts = std::make_unique<ThreadState>();
  ThreadState* raw = ts.get();
  {
    std::lock_guard lock(threads_mu_);
    ts->id = static_cast<std::uint16_t>(threads_.size());
    ts->window = &tracker_.add_thread(ts->id, window_);
    ts->ledger.resize(num_nodes());
    ts->qps.resize(num_nodes());
    for (NodeId p : peers()) ts->qps[p] = nic_.create_qp(p, ts->id);
    threads_.push_back(std::move(ts));
  }
  tl.bindings.emplace_back(binding_key_, raw);
  return *raw;
}

std::vector<ThreadState*> Manager::thread_snapshot() const {
  std::lock_guard lock(threads_mu_);
  std::vector<ThreadState*> out;
  for (const auto& t : threads_) out.push_back(t.get());
  return out;
}

QueuePair& Manager::qp(ThreadState& ts, NodeId peer) {
  if (peer >= num_nodes() || !ts.qps[peer]) {
    throw UsageError("no queue pair to node " + std::to_string(peer));
  }
  return *ts.qps[peer];
}

AckKey Manager::post(ThreadState& ts, VerbRequest req, ResultSink sink) {
  QueuePair& q = qp(ts, req.target_node);
  NodeId peer = req.target_node;
  bool is_write = req.kind == VerbKind::kWrite;
  OpId op = tracker_.acquire(*ts.window, sink);
  req.op_id = op.pack();
  AckKey key = tracker_.key_for(*ts.window, op);
  {
    std::lock_guard gate(q.gate);
    try {
      nic_.post(q, std::move(req));
    } catch (...) {
      tracker_.cancel(*ts.window, op);
      throw;
    }
    if (is_write) {
      LedgerEntry& l = ts.ledger[peer];
      l.unfenced |= key;
      ++l.writes;
    }
  }
  ++ts.remote_verbs;
  return key;
}

AckKey Manager::write(NodeId node, const RegionDesc& r, std::uint64_t offset,
                      std::span<const std::byte> data) {
  if (node == self()) {
    memory().local_store(r, offset, data);
    return {};
  }
  VerbRequest req;
  req.kind = VerbKind::kWrite;
  req.target_node = node;
  req.region = &r;
  req.offset = offset;
  req.length = static_cast<std::uint32_t>(data.size());
  req.payload.assign(data.begin(), data.end());
  return post(thread(), std::move(req), {});
}

AckKey Manager::read(NodeId node, const RegionDesc& r, std::uint64_t offset,
                     std::span<std::byte> out) {
  if (node == self()) {
    memory().local_load(r, offset, out);
    return {};
  }
  VerbRequest req;
  req.kind = VerbKind::kRead;
  req.target_node = node;
  req.region = &r;
  req.offset = offset;
  req.length = static_cast<std::uint32_t>(out.size());
  return post(thread(), std::move(req), ResultSink{out, nullptr});
}

AckKey Manager::fetch_add_async(NodeId node, const RegionDesc& r, std::uint64_t offset,
                                std::uint64_t delta, std::uint64_t* prior) {
  if (node == self()) {
    std::uint64_t v = memory().local_fetch_add(r, offset, delta);
    if (prior != nullptr) *prior = v;
    return {};
  }
  VerbRequest req;
  req.kind = VerbKind::kFetchAdd;
  req.target_node = node;
  req.region = &r;
  req.offset = offset;
  req.length = kWordSize;
  req.operand = delta;
  return post(thread(), std::move(req), ResultSink{{}, prior});
}

AckKey Manager::compare_swap_async(NodeId node, const RegionDesc& r, std::uint64_t offset,
                                   std::uint64_t expected, std::uint64_t desired,
                                   std::uint64_t* prior) {
  if (node == self()) {
    std::uint64_t v = memory().local_compare_swap(r, offset, expected, desired);
    if (prior != nullptr) *prior = v;
    return {};
  }
  VerbRequest req;
  req.kind = VerbKind::kCompareSwap;
  req.target_node = node;
  req.region = &r;
  req.offset = offset;
  req.length = kWordSize;
  req.operand = expected;
  req.desired = desired;
  return post(thread(), std::move(req), ResultSink{{}, prior});
}

std::uint64_t Manager::fetch_add(NodeId node, const RegionDesc& r, std::uint64_t offset,
                                 std::uint64_t delta) {
  std::uint64_t prior = 0;
  fetch_add_async(node, r, offset, delta, &prior).wait();
  return prior;
}

std::uint64_t Manager::compare_swap(NodeId node, const RegionDesc& r,
                                    std::uint64_t offset, std::uint64_t expected,
                                    std::uint64_t desired) {
  std::uint64_t prior = 0;
  compare_swap_async(node, r, offset, expected, desired, &prior).wait();
  return prior;
}

}  // namespace loco

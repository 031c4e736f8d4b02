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

#include "loco/socket_fabric.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <unordered_map>

namespace loco {

namespace wire {

namespace {

constexpr std::size_t kHeaderFixed = 4 + 1 + 8 + 2 + 8 + 4;

template <typename T>
void put(Bytes& out, T v) {
  auto b = as_bytes_of(v);
  out.insert(out.end(), b.begin(), b.end());
}

bool known_type(std::uint8_t t) { return t >= 1 && t <= 6; }

}  // namespace

std::string Frame::error_message() const {
  if (payload.size() < 2) return "remote error";
  auto n = load_as<std::uint16_t>(payload);
  return to_string(std::span(payload).subspan(2, std::min<std::size_t>(n, payload.size() - 2)));
}

Frame Frame::error(FrameType type, std::uint64_t op_id, const std::string& what) {
  Frame f;
  f.type = type;
  f.op_id = op_id;
  f.length = kErrorLength;
  std::string msg = what.substr(0, 0xFFFF);
  put(f.payload, static_cast<std::uint16_t>(msg.size()));
  Bytes m = to_bytes(msg);
  f.payload.insert(f.payload.end(), m.begin(), m.end());
  return f;
}

Bytes encode(const Frame& f) {
  Bytes out;
  out.reserve(kHeaderFixed + f.region.size() + f.payload.size());
  put(out, kFrameMagic);
  put(out, static_cast<std::uint8_t>(f.type));
  put(out, f.op_id);
  put(out, static_cast<std::uint16_t>(f.region.size()));
  Bytes name = to_bytes(f.region);
  out.insert(out.end(), name.begin(), name.end());
  put(out, f.offset);
  put(out, f.length);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

std::size_t payload_size(FrameType type, std::uint32_t length, std::span<const std::byte> head) {
  if (length == kErrorLength) {
    if (head.size() < 2) return 2;
    return 2 + load_as<std::uint16_t>(head);
  }
  switch (type) {
    case FrameType::kWrite:
    case FrameType::kReadResp:
      return length;
    case FrameType::kAtomicReq:
      return kAtomicRequestBytes;
    case FrameType::kAtomicResp:
      return kWordSize;
    case FrameType::kReadReq:
    case FrameType::kCompletionAck:
      return 0;
  }
  return 0;
}

void Decoder::feed(std::span<const std::byte> data) {
  if (pos_ > 0 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), data.begin(), data.end());
}

std::optional<Frame> Decoder::next() {
  std::span<const std::byte> b = std::span(buf_).subspan(pos_);
  if (b.size() < 4 + 1 + 8 + 2) return std::nullopt;
  if (load_as<std::uint32_t>(b) != kFrameMagic) throw FabricError("bad frame magic");
  auto type = static_cast<std::uint8_t>(b[4]);
  if (!known_type(type)) throw FabricError("unknown frame type " + std::to_string(type));
  auto name_len = load_as<std::uint16_t>(b, 13);
  std::size_t head = kHeaderFixed + name_len;
  if (b.size() < head) return std::nullopt;
  Frame f;
  f.type = static_cast<FrameType>(type);
  f.op_id = load_as<std::uint64_t>(b, 5);
  f.region = to_string(b.subspan(15, name_len));
  f.offset = load_as<std::uint64_t>(b, 15 + name_len);
  f.length = load_as<std::uint32_t>(b, 23 + name_len);
  std::size_t need = payload_size(f.type, f.length, b.subspan(head));
  if (f.length == kErrorLength && b.size() < head + 2) return std::nullopt;
  if (b.size() < head + need) return std::nullopt;
  f.payload.assign(b.begin() + static_cast<long>(head),
                   b.begin() + static_cast<long>(head + need));
  pos_ += head + need;
  return f;
}

}  // namespace wire

namespace {

void send_all(int fd, std::span<const std::byte> data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw FabricError(std::string("send failed: ") + std::strerror(errno));
    }
    data = data.subspan(static_cast<std::size_t>(n));
  }
}

// Reads into buf; returns 0 on orderly close or error.
std::size_t recv_some(int fd, std::span<std::byte> buf) {
  while (true) {
    ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    return n <= 0 ? 0 : static_cast<std::size_t>(n);
  }
}

bool recv_exact(int fd, std::span<std::byte> out) {
  while (!out.empty()) {
    std::size_t n = recv_some(fd, out);
    if (n == 0) return false;
    out = out.subspan(n);
  }
  return true;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

class SocketQp final : public QueuePair {
 public:
  SocketQp(SocketNic& nic, NodeId peer, std::uint32_t thread, int fd)
      : QueuePair(nic.runtime(), nic.self(), peer, thread), nic_(nic), fd_(fd) {
    reader_ = std::thread([this] { read_loop(); });
  }
  ~SocketQp() override {
    closing_ = true;
    ::shutdown(fd_, SHUT_RDWR);
    reader_.join();
    ::close(fd_);
  }

  void send(const wire::Frame& f, VerbKind kind) {
    Bytes bytes = wire::encode(f);
    {
      std::lock_guard lock(kinds_mu_);
      kinds_[f.op_id] = kind;
    }
    std::lock_guard lock(send_mu_);
    send_all(fd_, bytes);
  }

 private:
  void read_loop() {
    wire::Decoder dec;
    std::vector<std::byte> buf(64 * 1024);
    while (true) {
      std::size_t n = recv_some(fd_, buf);
      if (n == 0) break;
      dec.feed(std::span(buf).first(n));
      while (auto f = dec.next()) complete(*f);
    }
    // Connection lost: every verb still outstanding fails.
    std::lock_guard lock(kinds_mu_);
    for (auto& [op, kind] : kinds_) {
      WorkCompletion wc;
      wc.op_id = op;
      wc.kind = kind;
      wc.status = CompletionStatus::kError;
      wc.error = closing_ ? "queue pair closed" : "connection to peer lost";
      nic_.deliver(std::move(wc));
    }
    kinds_.clear();
  }

  void complete(const wire::Frame& f) {
    WorkCompletion wc;
    wc.op_id = f.op_id;
    {
      std::lock_guard lock(kinds_mu_);
      auto it = kinds_.find(f.op_id);
      if (it == kinds_.end()) return;
      wc.kind = it->second;
      kinds_.erase(it);
    }
    if (f.is_error()) {
      wc.status = CompletionStatus::kError;
      wc.error = f.error_message();
    } else if (f.type == wire::FrameType::kReadResp) {
      wc.data = f.payload;
    } else if (f.type == wire::FrameType::kAtomicResp) {
      wc.prior = load_as<std::uint64_t>(f.payload);
    }
    nic_.deliver(std::move(wc));
  }

  SocketNic& nic_;
  int fd_;
  std::atomic<bool> closing_{false};
  std::mutex send_mu_;
  std::mutex kinds_mu_;
  std::unordered_map<std::uint64_t, VerbKind> kinds_;
  std::thread reader_;
};

}  // namespace

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw SetupError("address '" + address + "' is not host:port");
  }
  std::string host = address.substr(0, colon);
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw SetupError("");
  } catch (const std::exception&) {
    throw SetupError("address '" + address + "' has a malformed port");
  }
  if (port == 0 || port > 65535) throw SetupError("address '" + address + "' port out of range");
  return {host, static_cast<std::uint16_t>(port)};
}

std::pair<int, std::uint16_t> SocketNic::listen_loopback() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw SetupError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 128) != 0) {
    ::close(fd);
    throw SetupError(std::string("cannot listen on loopback: ") + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return {fd, ntohs(addr.sin_port)};
}

SocketNic::SocketNic(Runtime& rt, HostsMap hosts, NodeMemory::Config memory, int listen_fd)
    : rt_(rt), hosts_(std::move(hosts)), memory_(hosts_.self, memory), listen_fd_(listen_fd) {
  if (listen_fd_ < 0) {
    auto [host, port] = split_address(hosts_.entries.at(hosts_.self));
    listen_fd_ = ::socket(AF_INET6, SOCK_STREAM, 0);
    bool v6 = listen_fd_ >= 0;
    if (!v6) listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    int rc;
    if (v6) {
      int zero = 0;
      ::setsockopt(listen_fd_, IPPROTO_IPV6, IPV6_V6ONLY, &zero, sizeof(zero));
      sockaddr_in6 addr{};
      addr.sin6_family = AF_INET6;
      addr.sin6_addr = in6addr_any;
      addr.sin6_port = htons(port);
      rc = ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    } else {
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_ANY);
      addr.sin_port = htons(port);
      rc = ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    }
    if (rc != 0 || ::listen(listen_fd_, 128) != 0) {
      std::string err = std::strerror(errno);
      ::close(listen_fd_);
      throw SetupError("cannot listen on port " + std::to_string(port) + ": " + err);
    }
  }
  acceptor_ = std::thread([this] { accept_loop(); });
}

SocketNic::~SocketNic() {
  closing_ = true;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  acceptor_.join();
  {
    std::lock_guard lock(control_out_mu_);
    for (auto& [peer, fd] : control_out_) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(conns_mu_);
    for (int fd : inbound_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(inbound_threads_);
  }
  for (auto& t : threads) t.join();
  for (int fd : inbound_fds_) ::close(fd);
}

void SocketNic::accept_loop() {
  while (!closing_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    set_nodelay(fd);
    std::lock_guard lock(conns_mu_);
    if (closing_) {
      ::close(fd);
      return;
    }
    inbound_fds_.push_back(fd);
    inbound_threads_.emplace_back([this, fd] { serve(fd); });
  }
}

void SocketNic::serve(int fd) {
  std::byte preface[9];
  if (!recv_exact(fd, preface)) return;
  if (load_as<std::uint32_t>(preface) != wire::kPrefaceMagic) return;
  auto kind = static_cast<wire::StreamKind>(preface[4]);
  auto from = load_as<std::uint32_t>(preface, 5);
  try {
    if (kind == wire::StreamKind::kQueuePair) {
      serve_qp(fd);
    } else if (kind == wire::StreamKind::kControl) {
      serve_control(fd, from);
    }
  } catch (const Error&) {
    // A broken stream ends this connection only.
  }
}

wire::Frame SocketNic::execute(const wire::Frame& req) {
  using wire::FrameType;
  wire::Frame resp;
  resp.op_id = req.op_id;
  resp.region = req.region;
  resp.offset = req.offset;
  FrameType resp_type = FrameType::kCompletionAck;
  if (req.type == FrameType::kReadReq) resp_type = FrameType::kReadResp;
  if (req.type == FrameType::kAtomicReq) resp_type = FrameType::kAtomicResp;
  resp.type = resp_type;
  try {
    if (req.type == FrameType::kReadReq && req.length == 0) return resp;
    auto region = memory_.find(req.region);
    if (!region) throw FabricError("unknown region '" + req.region + "'");
    switch (req.type) {
      case FrameType::kWrite:
        memory_.local_store(*region, req.offset, req.payload);
        break;
      case FrameType::kReadReq:
        resp.payload.resize(req.length);
        memory_.local_load(*region, req.offset, resp.payload);
        resp.length = req.length;
        break;
      case FrameType::kAtomicReq: {
        auto op = static_cast<std::uint8_t>(req.payload.at(0));
        auto operand = load_as<std::uint64_t>(req.payload, 1);
        auto desired = load_as<std::uint64_t>(req.payload, 9);
        std::uint64_t prior = op == 0
                                  ? memory_.local_fetch_add(*region, req.offset, operand)
                                  : memory_.local_compare_swap(*region, req.offset, operand,
                                                               desired);
        resp.payload.resize(kWordSize);
        store_as(std::span(resp.payload), 0, prior);
        resp.length = kWordSize;
        break;
      }
      default:
        throw FabricError("unexpected request frame");
    }
  } catch (const Error& e) {
    return wire::Frame::error(resp_type, req.op_id, e.what());
  }
  return resp;
}

void SocketNic::serve_qp(int fd) {
  wire::Decoder dec;
  std::vector<std::byte> buf(64 * 1024);
  while (true) {
    std::size_t n = recv_some(fd, buf);
    if (n == 0) return;
    dec.feed(std::span(buf).first(n));
    while (auto f = dec.next()) send_all(fd, wire::encode(execute(*f)));
  }
}

void SocketNic::serve_control(int fd, NodeId from) {
  while (true) {
    std::byte len_buf[4];
    if (!recv_exact(fd, len_buf)) return;
    Bytes msg(load_as<std::uint32_t>(len_buf));
    if (!recv_exact(fd, msg)) return;
    {
      std::lock_guard lock(inbox_mu_);
      inbox_.emplace_back(from, std::move(msg));
    }
    rt_.notify_all(control_signal_);
  }
}

int SocketNic::connect_to(NodeId peer, wire::StreamKind kind) {
  auto it = hosts_.entries.find(peer);
  if (it == hosts_.entries.end() || peer == self()) {
    throw FabricError("cannot connect node " + std::to_string(self()) + " to " +
                      std::to_string(peer));
  }
  auto [host, port] = split_address(it->second);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
  while (true) {
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) == 0) {
      for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
        int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
          ::freeaddrinfo(res);
          set_nodelay(fd);
          Bytes preface;
          auto m = as_bytes_of(wire::kPrefaceMagic);
          preface.insert(preface.end(), m.begin(), m.end());
          preface.push_back(static_cast<std::byte>(kind));
          auto from = static_cast<std::uint32_t>(self());
          auto s = as_bytes_of(from);
          preface.insert(preface.end(), s.begin(), s.end());
          send_all(fd, preface);
          return fd;
        }
        ::close(fd);
      }
      ::freeaddrinfo(res);
    }
    if (closing_ || std::chrono::steady_clock::now() > deadline) {
      throw FabricError("cannot connect to node " + std::to_string(peer) + " at " + it->second);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::unique_ptr<QueuePair> SocketNic::create_qp(NodeId peer, std::uint32_t thread) {
  int fd = connect_to(peer, wire::StreamKind::kQueuePair);
  return std::make_unique<SocketQp>(*this, peer, thread, fd);
}

void SocketNic::do_post(QueuePair& qp, VerbRequest&& req) {
  auto& sq = static_cast<SocketQp&>(qp);
  wire::Frame f;
  f.op_id = req.op_id;
  f.offset = req.offset;
  f.length = req.length;
  if (req.region != nullptr) f.region = req.region->name;
  switch (req.kind) {
    case VerbKind::kWrite:
      f.type = wire::FrameType::kWrite;
      f.payload = std::move(req.payload);
      break;
    case VerbKind::kRead:
    case VerbKind::kZeroLengthRead:
      f.type = wire::FrameType::kReadReq;
      break;
    case VerbKind::kFetchAdd:
    case VerbKind::kCompareSwap: {
      f.type = wire::FrameType::kAtomicReq;
      f.payload.resize(wire::kAtomicRequestBytes);
      f.payload[0] = std::byte{req.kind == VerbKind::kFetchAdd ? std::uint8_t{0} : std::uint8_t{1}};
      store_as(std::span(f.payload), 1, req.operand);
      store_as(std::span(f.payload), 9, req.desired);
      break;
    }
  }
  sq.send(f, req.kind);
}

void SocketNic::deliver(WorkCompletion wc) {
  {
    std::lock_guard lock(cq_mu_);
    cq_.push_back(std::move(wc));
  }
  rt_.notify_all(cq_signal_);
}

std::vector<WorkCompletion> SocketNic::poll() {
  std::lock_guard lock(cq_mu_);
  std::vector<WorkCompletion> out(std::make_move_iterator(cq_.begin()),
                                  std::make_move_iterator(cq_.end()));
  cq_.clear();
  return out;
}

bool SocketNic::has_completions() {
  std::lock_guard lock(cq_mu_);
  return !cq_.empty();
}

void SocketNic::send_control(NodeId peer, Bytes msg) {
  std::lock_guard lock(control_out_mu_);
  auto it = control_out_.find(peer);
  if (it == control_out_.end()) {
    it = control_out_.emplace(peer, connect_to(peer, wire::StreamKind::kControl)).first;
  }
  Bytes framed;
  auto size = static_cast<std::uint32_t>(msg.size());
  auto len = as_bytes_of(size);
  framed.insert(framed.end(), len.begin(), len.end());
  framed.insert(framed.end(), msg.begin(), msg.end());
  send_all(it->second, framed);
}

std::optional<std::pair<NodeId, Bytes>> SocketNic::recv_control() {
  std::lock_guard lock(inbox_mu_);
  if (inbox_.empty()) return std::nullopt;
  auto out = std::move(inbox_.front());
  inbox_.pop_front();
  return out;
}

bool SocketNic::has_control() {
  std::lock_guard lock(inbox_mu_);
  return !inbox_.empty();
}

}  // namespace loco

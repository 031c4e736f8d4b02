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

// TCP backend for running nodes as separate processes. Every queue pair is
// its own stream and the target applies frames in arrival order, so
// placement happens on arrival and R1-R4 hold trivially.

#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "loco/fabric.hpp"
#include "loco/manager.hpp"

namespace loco {

namespace wire {

inline constexpr std::uint32_t kFrameMagic = 0x4C4F434F;
inline constexpr std::uint32_t kPrefaceMagic = 0x4C4F4350;
// A response carrying this length is an error; its payload is a u16 length
// and a message.
inline constexpr std::uint32_t kErrorLength = 0xFFFFFFFF;
inline constexpr std::size_t kAtomicRequestBytes = 17;

enum class FrameType : std::uint8_t {
  kWrite = 1,
  kReadReq = 2,
  kReadResp = 3,
  kAtomicReq = 4,
  kAtomicResp = 5,
  kCompletionAck = 6,
};

enum class StreamKind : std::uint8_t { kQueuePair = 1, kControl = 2 };

struct Frame {
  FrameType type = FrameType::kWrite;
  std::uint64_t op_id = 0;
  std::string region;
  std::uint64_t offset = 0;
  std::uint32_t length = 0;
  Bytes payload;

  bool is_error() const { return length == kErrorLength; }
  std::string error_message() const;
  static Frame error(FrameType type, std::uint64_t op_id, const std::string& what);
};

Bytes encode(const Frame& f);
// Bytes of payload that follow a header with this type and length.
std::size_t payload_size(FrameType type, std::uint32_t length, std::span<const std::byte> head);

// Incremental decoder: feed bytes, take complete frames. Throws
// FabricError on a bad magic or unknown type.
class Decoder {
 public:
  void feed(std::span<const std::byte> data);
  std::optional<Frame> next();

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

}  // namespace wire

// Parses "host:port".
std::pair<std::string, std::uint16_t> split_address(const std::string& address);

class SocketNic final : public Nic {
 public:
  // Binds the listening socket for hosts.entries[hosts.self] unless a
  // listening descriptor is handed over.
  SocketNic(Runtime& rt, HostsMap hosts, NodeMemory::Config memory = {}, int listen_fd = -1);
  ~SocketNic() override;

  NodeId self() const override { return hosts_.self; }
  std::size_t num_nodes() const override { return hosts_.size(); }
  NodeMemory& memory() override { return memory_; }
  Runtime& runtime() override { return rt_; }

  std::unique_ptr<QueuePair> create_qp(NodeId peer, std::uint32_t thread) override;

  std::vector<WorkCompletion> poll() override;
  WaitQueue& completion_signal() override { return cq_signal_; }
  bool has_completions() override;

  void send_control(NodeId peer, Bytes msg) override;
  std::optional<std::pair<NodeId, Bytes>> recv_control() override;
  WaitQueue& control_signal() override { return control_signal_; }
  bool has_control() override;

  // Listens on 127.0.0.1 with an ephemeral port; returns {fd, port}.
  static std::pair<int, std::uint16_t> listen_loopback();

  void deliver(WorkCompletion wc);

 protected:
  void do_post(QueuePair& qp, VerbRequest&& req) override;

 private:
  void accept_loop();
  void serve(int fd);
  void serve_qp(int fd);
  void serve_control(int fd, NodeId from);
  wire::Frame execute(const wire::Frame& req);
  int connect_to(NodeId peer, wire::StreamKind kind);

  Runtime& rt_;
  HostsMap hosts_;
  NodeMemory memory_;
  int listen_fd_ = -1;
  std::atomic<bool> closing_{false};
  std::thread acceptor_;

  std::mutex conns_mu_;
  std::vector<int> inbound_fds_;
  std::vector<std::thread> inbound_threads_;

  std::mutex control_out_mu_;
  std::map<NodeId, int> control_out_;

  std::mutex cq_mu_;
  std::deque<WorkCompletion> cq_;
  WaitQueue cq_signal_;

  std::mutex inbox_mu_;
  std::deque<std::pair<NodeId, Bytes>> inbox_;
  WaitQueue control_signal_;
};

}  // namespace loco

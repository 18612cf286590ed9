/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/tcp_fabric.cc
 * \brief TCP backend of the transfer plane (service mode).
 */
#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <mutex>
#include <thread>

#include "splitserve/errors.h"
#include "splitserve/transport.h"

namespace splitserve {

namespace {

std::pair<std::string, uint16_t> ParseHostPort(const std::string& addr) {
  auto colon = addr.rfind(':');
  SPLITSERVE_CHECK(colon != std::string::npos, ErrorCode::kInvalidArgument,
                   "address must be host:port, got " + addr);
  return {addr.substr(0, colon), static_cast<uint16_t>(std::stoi(addr.substr(colon + 1)))};
}

bool ReadExact(int fd, uint8_t* buf, size_t n) {
  size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r <= 0) return false;
    got += static_cast<size_t>(r);
  }
  return true;
}

bool WriteAll(int fd, const uint8_t* buf, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r <= 0) return false;
    sent += static_cast<size_t>(r);
  }
  return true;
}

bool WriteFrameBytes(int fd, const std::vector<uint8_t>& frame) {
  uint8_t len[4];
  uint32_t n = static_cast<uint32_t>(frame.size());
  for (int i = 0; i < 4; ++i) len[i] = static_cast<uint8_t>(n >> (8 * i));
  return WriteAll(fd, len, 4) && WriteAll(fd, frame.data(), frame.size());
}

bool ReadFrameBytes(int fd, std::vector<uint8_t>* out) {
  uint8_t len[4];
  if (!ReadExact(fd, len, 4)) return false;
  uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<uint32_t>(len[i]) << (8 * i);
  if (n > (1u << 30)) return false;
  out->resize(n);
  return ReadExact(fd, out->data(), n);
}

}  // namespace

struct TcpFabric::Impl {
  Rank self;
  std::string listen_addr;
  std::map<Rank, std::string> peers;
  EventLog* log;
  SteadyClock clock;

  ReceiverPort receiver;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::thread accept_thread;
  std::mutex inbound_mu;
  std::vector<std::thread> inbound_threads;
  std::vector<int> inbound_fds;

  struct Conn {
    int fd = -1;
    std::mutex write_mu;
    std::thread ack_reader;
  };
  std::mutex conns_mu;
  std::map<Rank, std::unique_ptr<Conn>> conns;

  struct FrameKey {
    int32_t layer;
    int64_t token_begin;
    bool operator<(const FrameKey& o) const {
      return layer != o.layer ? layer < o.layer : token_begin < o.token_begin;
    }
  };
  struct Job {
    Rank dst;
    JobCallback cb;
    std::map<FrameKey, std::pair<WriteFrame, int>> inflight;  // frame, attempts
    int64_t submitted = 0;
    int64_t acked = 0;
    bool closed = false;
    bool failed = false;
    bool done = false;
  };
  std::mutex jobs_mu;
  std::map<uint64_t, Job> jobs;
  std::map<uint64_t, uint64_t> tag_to_job;
  uint64_t next_job = 1;

  void Start() {
    auto [host, port] = ParseHostPort(listen_addr);
    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    SPLITSERVE_CHECK(listen_fd >= 0, ErrorCode::kInternal, "socket() failed");
    int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    sa.sin_addr.s_addr = host == "0.0.0.0" ? INADDR_ANY : ::inet_addr(host.c_str());
    SPLITSERVE_CHECK(::bind(listen_fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0,
                     ErrorCode::kInternal, "bind failed for " + listen_addr);
    SPLITSERVE_CHECK(::listen(listen_fd, 16) == 0, ErrorCode::kInternal, "listen failed");
    accept_thread = std::thread([this] { AcceptLoop(); });
  }

  void AcceptLoop() {
    while (!stopping.load()) {
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) break;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      std::lock_guard<std::mutex> lock(inbound_mu);
      inbound_fds.push_back(fd);
      inbound_threads.emplace_back([this, fd] { InboundLoop(fd); });
    }
  }

  void InboundLoop(int fd) {
    std::vector<uint8_t> buf;
    while (!stopping.load() && ReadFrameBytes(fd, &buf)) {
      DecodedFrame decoded;
      try {
        decoded = DecodeFrame(buf.data(), buf.size());
      } catch (const Error&) {
        break;  // framing is broken beyond recovery on this connection
      }
      if (decoded.type != FrameType::kWrite) continue;
      AckFrame ack;
      ack.seq_tag = decoded.write.seq_tag;
      ack.layer = decoded.write.layer;
      ack.token_begin = decoded.write.addr.token_begin;
      if (!decoded.crc_ok) {
        ack.status = AckStatus::kChecksumMismatch;
      } else {
        KVCache::ApplyStatus status = receiver.apply(decoded.write);
        if (log) {
          log->Append({clock.NowMs(), EventKind::kFrameDeliver, self, decoded.write.layer,
                       decoded.write.addr.token_count,
                       static_cast<int64_t>(decoded.write.seq_tag), ""});
        }
        if (receiver.wake) receiver.wake();
        ack.status = status == KVCache::ApplyStatus::kUnknownAddress
                         ? AckStatus::kUnknownAddress
                         : AckStatus::kOk;
      }
      if (!WriteFrameBytes(fd, EncodeAckFrame(ack))) break;
    }
    ::close(fd);
  }

  Conn* GetConn(Rank dst) {
    std::lock_guard<std::mutex> lock(conns_mu);
    auto it = conns.find(dst);
    if (it != conns.end()) return it->second.get();
    auto pit = peers.find(dst);
    SPLITSERVE_CHECK(pit != peers.end(), ErrorCode::kPeerUnreachable,
                     "no peer address for rank " + std::to_string(dst));
    auto [host, port] = ParseHostPort(pit->second);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    SPLITSERVE_CHECK(fd >= 0, ErrorCode::kInternal, "socket() failed");
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    sa.sin_addr.s_addr = ::inet_addr(host == "0.0.0.0" ? "127.0.0.1" : host.c_str());
    int rc = -1;
    for (int attempt = 0; attempt < 50; ++attempt) {
      rc = ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
      if (rc == 0) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    if (rc != 0) {
      ::close(fd);
      throw Error(ErrorCode::kPeerUnreachable, "connect failed to " + pit->second);
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_unique<Conn>();
    conn->fd = fd;
    Conn* out = conn.get();
    conn->ack_reader = std::thread([this, fd] { AckLoop(fd); });
    conns[dst] = std::move(conn);
    return out;
  }

  void AckLoop(int fd) {
    std::vector<uint8_t> buf;
    while (!stopping.load() && ReadFrameBytes(fd, &buf)) {
      DecodedFrame decoded;
      try {
        decoded = DecodeFrame(buf.data(), buf.size());
      } catch (const Error&) {
        break;
      }
      if (decoded.type != FrameType::kAck) continue;
      HandleAck(decoded.ack);
    }
  }

  void HandleAck(const AckFrame& ack) {
    JobCallback finished_cb;
    bool finished_ok = false;
    WriteFrame resend;
    Rank resend_dst = -1;
    {
      std::lock_guard<std::mutex> lock(jobs_mu);
      auto tit = tag_to_job.find(ack.seq_tag);
      if (tit == tag_to_job.end()) return;
      auto jit = jobs.find(tit->second);
      if (jit == jobs.end()) return;
      Job& job = jit->second;
      FrameKey key{ack.layer, ack.token_begin};
      auto fit = job.inflight.find(key);
      if (fit == job.inflight.end()) return;
      if (ack.status == AckStatus::kChecksumMismatch && fit->second.second < 2) {
        fit->second.second += 1;
        resend = fit->second.first;
        resend_dst = job.dst;
      } else {
        if (ack.status != AckStatus::kOk) job.failed = true;
        job.inflight.erase(fit);
        ++job.acked;
        if (job.closed && job.acked >= job.submitted && !job.done) {
          job.done = true;
          finished_cb = std::move(job.cb);
          finished_ok = !job.failed;
        }
      }
      if (log && ack.status != AckStatus::kOk) {
        log->Append({clock.NowMs(), EventKind::kFrameAck, self, ack.layer,
                     static_cast<int64_t>(ack.status), static_cast<int64_t>(ack.seq_tag),
                     "error"});
      }
    }
    if (resend_dst >= 0) {
      SendFrame(resend_dst, resend);
      return;
    }
    if (finished_cb) finished_cb(finished_ok, clock.NowMs());
  }

  void SendFrame(Rank dst, const WriteFrame& frame) {
    Conn* conn = GetConn(dst);
    std::vector<uint8_t> bytes = EncodeWriteFrame(frame);
    std::lock_guard<std::mutex> lock(conn->write_mu);
    if (!WriteFrameBytes(conn->fd, bytes)) {
      throw Error(ErrorCode::kPeerUnreachable, "send failed to rank " + std::to_string(dst));
    }
    if (log) {
      log->Append({clock.NowMs(), EventKind::kFrameEnqueue, self, frame.layer,
                   frame.addr.token_count, static_cast<int64_t>(frame.seq_tag), ""});
    }
  }

  void Stop() {
    if (stopping.exchange(true)) return;
    if (listen_fd >= 0) {
      ::shutdown(listen_fd, SHUT_RDWR);
      ::close(listen_fd);
    }
    if (accept_thread.joinable()) accept_thread.join();
    {
      std::lock_guard<std::mutex> lock(conns_mu);
      for (auto& [rank, conn] : conns) {
        ::shutdown(conn->fd, SHUT_RDWR);
        ::close(conn->fd);
      }
    }
    {
      std::lock_guard<std::mutex> lock(inbound_mu);
      for (int fd : inbound_fds) ::shutdown(fd, SHUT_RDWR);
      for (auto& t : inbound_threads) {
        if (t.joinable()) t.join();
      }
    }
    std::lock_guard<std::mutex> lock(conns_mu);
    for (auto& [rank, conn] : conns) {
      if (conn->ack_reader.joinable()) conn->ack_reader.join();
    }
  }
};

TcpFabric::TcpFabric(Rank self, std::string listen_addr, std::map<Rank, std::string> peers,
                     EventLog* log)
    : impl_(std::make_unique<Impl>()) {
  impl_->self = self;
  impl_->listen_addr = std::move(listen_addr);
  impl_->peers = std::move(peers);
  impl_->log = log;
}

TcpFabric::~TcpFabric() { Stop(); }

void TcpFabric::Start() { impl_->Start(); }
void TcpFabric::Stop() { impl_->Stop(); }

void TcpFabric::RegisterReceiver(Rank rank, ReceiverPort port) {
  SPLITSERVE_CHECK(rank == impl_->self, ErrorCode::kInvalidArgument,
                   "a TCP fabric only hosts its own rank");
  impl_->receiver = std::move(port);
}

uint64_t TcpFabric::OpenJob(Rank src, Rank dst, JobCallback on_done) {
  SPLITSERVE_CHECK(src == impl_->self, ErrorCode::kInvalidArgument, "job must originate here");
  std::lock_guard<std::mutex> lock(impl_->jobs_mu);
  uint64_t id = impl_->next_job++;
  Impl::Job job;
  job.dst = dst;
  job.cb = std::move(on_done);
  impl_->jobs.emplace(id, std::move(job));
  return id;
}

void TcpFabric::Submit(uint64_t job_id, WriteFrame frame, TimeMs /*enqueue_at*/) {
  {
    std::lock_guard<std::mutex> lock(impl_->jobs_mu);
    auto it = impl_->jobs.find(job_id);
    SPLITSERVE_ICHECK(it != impl_->jobs.end(), "unknown transfer job");
    it->second.inflight[{frame.layer, frame.addr.token_begin}] = {frame, 1};
    ++it->second.submitted;
    impl_->tag_to_job[frame.seq_tag] = job_id;
  }
  Rank dst;
  {
    std::lock_guard<std::mutex> lock(impl_->jobs_mu);
    dst = impl_->jobs.at(job_id).dst;
  }
  try {
    impl_->SendFrame(dst, frame);
  } catch (const Error&) {
    std::lock_guard<std::mutex> lock(impl_->jobs_mu);
    auto it = impl_->jobs.find(job_id);
    if (it != impl_->jobs.end()) {
      it->second.failed = true;
      it->second.inflight.erase({frame.layer, frame.addr.token_begin});
      ++it->second.acked;
    }
  }
}

void TcpFabric::CloseJob(uint64_t job_id) {
  JobCallback cb;
  bool ok = false;
  {
    std::lock_guard<std::mutex> lock(impl_->jobs_mu);
    auto it = impl_->jobs.find(job_id);
    SPLITSERVE_ICHECK(it != impl_->jobs.end(), "unknown transfer job");
    Impl::Job& job = it->second;
    job.closed = true;
    if (job.acked >= job.submitted && !job.done) {
      job.done = true;
      cb = std::move(job.cb);
      ok = !job.failed;
    }
  }
  if (cb) cb(ok, impl_->clock.NowMs());
}

}  // namespace splitserve

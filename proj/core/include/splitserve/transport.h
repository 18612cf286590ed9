/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/transport.h
 * \brief Emulated one-sided remote-write plane with layer-eager streaming.
 *
 * Wire format (little-endian, length-prefixed on TCP):
 *   u32 magic = 0x4B565452 ("KVTR"), u16 version = 1, u8 type
 *   type 0 (write): u64 seq_tag, u16 layer, KVAddrInfo encoding,
 *                   u32 payload_bytes, payload (u64 words LE,
 *                   layer-major then slot-major), u32 crc32(payload)
 *   type 1 (ack):   u64 seq_tag, u16 layer, u64 token_begin, u8 status
 *                   (0 = ok, 1 = checksum mismatch, 2 = unknown address)
 */
#ifndef SPLITSERVE_TRANSPORT_H_
#define SPLITSERVE_TRANSPORT_H_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "splitserve/clock.h"
#include "splitserve/common.h"
#include "splitserve/config.h"
#include "splitserve/event_log.h"
#include "splitserve/kv_addr.h"
#include "splitserve/kv_cache.h"

namespace splitserve {

constexpr uint32_t kFrameMagic = 0x4B565452;  // "KVTR"
constexpr uint16_t kWireVersion = 1;

enum class FrameType : uint8_t { kWrite = 0, kAck = 1 };
enum class AckStatus : uint8_t { kOk = 0, kChecksumMismatch = 1, kUnknownAddress = 2 };

struct WriteFrame {
  uint64_t seq_tag = 0;
  int32_t layer = 0;
  KVAddrInfo addr;
  std::vector<uint64_t> payload;  // addr.token_count * dim words
  bool operator==(const WriteFrame&) const = default;
};

struct AckFrame {
  uint64_t seq_tag = 0;
  int32_t layer = 0;
  int64_t token_begin = 0;
  AckStatus status = AckStatus::kOk;
};

uint32_t Crc32(const uint8_t* data, size_t size);

std::vector<uint8_t> EncodeWriteFrame(const WriteFrame& frame);
std::vector<uint8_t> EncodeAckFrame(const AckFrame& ack);

struct DecodedFrame {
  FrameType type;
  WriteFrame write;
  AckFrame ack;
  bool crc_ok = true;
};
/*! \brief Decodes one frame (without the TCP length prefix). */
DecodedFrame DecodeFrame(const uint8_t* data, size_t size);

/*! \brief Receive side of an engine, as seen by a fabric. */
struct ReceiverPort {
  std::function<KVCache::ApplyStatus(const WriteFrame&)> apply;
  std::function<void()> wake;
};

/*!
 * \brief Transfer plane. Frames for a job stream in submit order over one
 *        channel per engine pair; the job completes when every submitted
 *        frame is acked after CloseJob.
 */
class Fabric {
 public:
  virtual ~Fabric() = default;
  using JobCallback = std::function<void(bool ok, TimeMs t)>;

  virtual void RegisterReceiver(Rank rank, ReceiverPort port) = 0;
  virtual uint64_t OpenJob(Rank src, Rank dst, JobCallback on_done) = 0;
  /*! \brief enqueue_at is the virtual availability time (>= layer compute end). */
  virtual void Submit(uint64_t job, WriteFrame frame, TimeMs enqueue_at) = 0;
  virtual void CloseJob(uint64_t job) = 0;
};

/*! \brief Event scheduler interface the in-memory fabric runs on. */
class VirtualScheduler {
 public:
  virtual ~VirtualScheduler() = default;
  virtual TimeMs Now() const = 0;
  virtual void ScheduleAt(TimeMs t, std::function<void()> fn) = 0;
};

/*! \brief Fault injected at delivery time, for tests. */
enum class FaultAction {
  kNone,
  kCorruptDetected,  // emulate a bit flip the checksum catches
  kCorruptSilent,    // corrupt payload with a valid checksum
};
using FaultHook = std::function<FaultAction(WriteFrame*)>;

/*!
 * \brief Deterministic in-memory backend: one channel per (src, dst) pair,
 *        frame service time X(n) from the cost model, delivery applied at
 *        enqueue + queueing + X(n) on the virtual clock.
 */
class InMemoryFabric : public Fabric {
 public:
  InMemoryFabric(VirtualScheduler* sched, CostModel cost, EventLog* log = nullptr);

  void RegisterReceiver(Rank rank, ReceiverPort port) override;
  uint64_t OpenJob(Rank src, Rank dst, JobCallback on_done) override;
  void Submit(uint64_t job, WriteFrame frame, TimeMs enqueue_at) override;
  void CloseJob(uint64_t job) override;

  void SetFaultHook(FaultHook hook) { fault_ = std::move(hook); }

 private:
  struct Job {
    Rank src;
    Rank dst;
    JobCallback on_done;
    int64_t submitted = 0;
    int64_t acked = 0;
    bool closed = false;
    bool failed = false;
    bool done = false;
  };
  void Deliver(uint64_t job_id, WriteFrame frame, int attempt);
  void MaybeFinish(uint64_t job_id);

  VirtualScheduler* sched_;
  CostModel cost_;
  EventLog* log_;
  std::map<Rank, ReceiverPort> receivers_;
  std::map<std::pair<Rank, Rank>, TimeMs> channel_busy_until_;
  std::map<uint64_t, Job> jobs_;
  uint64_t next_job_ = 1;
  FaultHook fault_;
};

/*!
 * \brief TCP backend for service mode. Frames go out immediately; acks come
 *        back on the same connection. A frame failing its checksum is
 *        retransmitted once, then the job fails.
 */
class TcpFabric : public Fabric {
 public:
  TcpFabric(Rank self, std::string listen_addr, std::map<Rank, std::string> peers,
            EventLog* log = nullptr);
  ~TcpFabric() override;

  void Start();
  void Stop();

  void RegisterReceiver(Rank rank, ReceiverPort port) override;
  uint64_t OpenJob(Rank src, Rank dst, JobCallback on_done) override;
  void Submit(uint64_t job, WriteFrame frame, TimeMs enqueue_at) override;
  void CloseJob(uint64_t job) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace splitserve

#endif  // SPLITSERVE_TRANSPORT_H_

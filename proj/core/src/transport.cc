/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/transport.cc
 * \brief Frame codec and the deterministic in-memory fabric.
 */
#include "splitserve/transport.h"

#include <array>

#include "splitserve/errors.h"

namespace splitserve {

uint32_t Crc32(const uint8_t* data, size_t size) {
  // CRC-32 (IEEE 802.3), reflected, polynomial 0xEDB88320.
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < size; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {
template <typename T>
void PutLE(std::vector<uint8_t>* out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) {
    out->push_back(static_cast<uint8_t>(static_cast<uint64_t>(v) >> (8 * i)));
  }
}
template <typename T>
T GetLE(const uint8_t* data, size_t size, size_t* pos) {
  SPLITSERVE_CHECK(*pos + sizeof(T) <= size, ErrorCode::kInvalidArgument, "truncated frame");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(data[*pos + i]) << (8 * i);
  *pos += sizeof(T);
  return static_cast<T>(v);
}
}  // namespace

std::vector<uint8_t> EncodeWriteFrame(const WriteFrame& frame) {
  std::vector<uint8_t> out;
  PutLE<uint32_t>(&out, kFrameMagic);
  PutLE<uint16_t>(&out, kWireVersion);
  PutLE<uint8_t>(&out, static_cast<uint8_t>(FrameType::kWrite));
  PutLE<uint64_t>(&out, frame.seq_tag);
  PutLE<uint16_t>(&out, static_cast<uint16_t>(frame.layer));
  frame.addr.EncodeTo(&out);
  std::vector<uint8_t> payload;
  payload.reserve(frame.payload.size() * 8);
  for (uint64_t w : frame.payload) PutLE<uint64_t>(&payload, w);
  PutLE<uint32_t>(&out, static_cast<uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  PutLE<uint32_t>(&out, Crc32(payload.data(), payload.size()));
  return out;
}

std::vector<uint8_t> EncodeAckFrame(const AckFrame& ack) {
  std::vector<uint8_t> out;
  PutLE<uint32_t>(&out, kFrameMagic);
  PutLE<uint16_t>(&out, kWireVersion);
  PutLE<uint8_t>(&out, static_cast<uint8_t>(FrameType::kAck));
  PutLE<uint64_t>(&out, ack.seq_tag);
  PutLE<uint16_t>(&out, static_cast<uint16_t>(ack.layer));
  PutLE<uint64_t>(&out, static_cast<uint64_t>(ack.token_begin));
  PutLE<uint8_t>(&out, static_cast<uint8_t>(ack.status));
  return out;
}

DecodedFrame DecodeFrame(const uint8_t* data, size_t size) {
  size_t pos = 0;
  uint32_t magic = GetLE<uint32_t>(data, size, &pos);
  SPLITSERVE_CHECK(magic == kFrameMagic, ErrorCode::kInvalidArgument, "bad frame magic");
  uint16_t version = GetLE<uint16_t>(data, size, &pos);
  SPLITSERVE_CHECK(version == kWireVersion, ErrorCode::kInvalidArgument, "bad wire version");
  DecodedFrame out;
  out.type = static_cast<FrameType>(GetLE<uint8_t>(data, size, &pos));
  if (out.type == FrameType::kWrite) {
    out.write.seq_tag = GetLE<uint64_t>(data, size, &pos);
    out.write.layer = GetLE<uint16_t>(data, size, &pos);
    out.write.addr = KVAddrInfo::DecodeFrom(data, size, &pos);
    uint32_t payload_bytes = GetLE<uint32_t>(data, size, &pos);
    SPLITSERVE_CHECK(payload_bytes % 8 == 0 && pos + payload_bytes + 4 <= size,
                     ErrorCode::kInvalidArgument, "bad payload length");
    uint32_t crc = Crc32(data + pos, payload_bytes);
    out.write.payload.resize(payload_bytes / 8);
    for (size_t i = 0; i < out.write.payload.size(); ++i) {
      out.write.payload[i] = GetLE<uint64_t>(data, size, &pos);
    }
    uint32_t wire_crc = GetLE<uint32_t>(data, size, &pos);
    out.crc_ok = (crc == wire_crc);
  } else if (out.type == FrameType::kAck) {
    out.ack.seq_tag = GetLE<uint64_t>(data, size, &pos);
    out.ack.layer = GetLE<uint16_t>(data, size, &pos);
    out.ack.token_begin = static_cast<int64_t>(GetLE<uint64_t>(data, size, &pos));
    out.ack.status = static_cast<AckStatus>(GetLE<uint8_t>(data, size, &pos));
  } else {
    SPLITSERVE_CHECK(false, ErrorCode::kInvalidArgument, "unknown frame type");
  }
  return out;
}

//----------------------------------------------------------------------
// InMemoryFabric
//----------------------------------------------------------------------

InMemoryFabric::InMemoryFabric(VirtualScheduler* sched, CostModel cost, EventLog* log)
    : sched_(sched), cost_(cost), log_(log) {}

void InMemoryFabric::RegisterReceiver(Rank rank, ReceiverPort port) {
  receivers_[rank] = std::move(port);
}

uint64_t InMemoryFabric::OpenJob(Rank src, Rank dst, JobCallback on_done) {
  SPLITSERVE_CHECK(receivers_.count(dst), ErrorCode::kPeerUnreachable,
                   "no receiver registered for rank " + std::to_string(dst));
  uint64_t id = next_job_++;
  jobs_[id] = Job{src, dst, std::move(on_done)};
  return id;
}

void InMemoryFabric::Submit(uint64_t job_id, WriteFrame frame, TimeMs enqueue_at) {
  auto it = jobs_.find(job_id);
  SPLITSERVE_ICHECK(it != jobs_.end(), "unknown transfer job");
  Job& job = it->second;
  ++job.submitted;
  if (log_) {
    log_->Append({enqueue_at, EventKind::kFrameEnqueue, job.src, frame.layer,
                  frame.addr.token_count, static_cast<int64_t>(frame.seq_tag), ""});
  }
  // The channel picks the frame up no earlier than its enqueue time.
  sched_->ScheduleAt(enqueue_at, [this, job_id, frame = std::move(frame)]() mutable {
    Deliver(job_id, std::move(frame), 1);
  });
}

void InMemoryFabric::Deliver(uint64_t job_id, WriteFrame frame, int attempt) {
  auto it = jobs_.find(job_id);
  SPLITSERVE_ICHECK(it != jobs_.end(), "unknown transfer job");
  Job& job = it->second;
  TimeMs& busy = channel_busy_until_[{job.src, job.dst}];
  TimeMs start = std::max(busy, sched_->Now());
  TimeMs arrive = start + cost_.TransferLayerMs(frame.addr.token_count);
  busy = arrive;
  sched_->ScheduleAt(arrive, [this, job_id, frame = std::move(frame), attempt]() mutable {
    auto jit = jobs_.find(job_id);
    if (jit == jobs_.end()) return;
    Job& job = jit->second;
    FaultAction fault = FaultAction::kNone;
    if (attempt == 1 && fault_) fault = fault_(&frame);
    if (fault == FaultAction::kCorruptDetected) {
      // Checksum failed at the receiver: retransmit once.
      if (log_) {
        log_->Append({sched_->Now(), EventKind::kFrameAck, job.src, frame.layer,
                      static_cast<int64_t>(AckStatus::kChecksumMismatch),
                      static_cast<int64_t>(frame.seq_tag), "retransmit"});
      }
      Deliver(job_id, std::move(frame), attempt + 1);
      return;
    }
    auto rit = receivers_.find(job.dst);
    SPLITSERVE_ICHECK(rit != receivers_.end(), "receiver vanished");
    KVCache::ApplyStatus status = rit->second.apply(frame);
    if (log_) {
      log_->Append({sched_->Now(), EventKind::kFrameDeliver, job.dst, frame.layer,
                    frame.addr.token_count, static_cast<int64_t>(frame.seq_tag), ""});
    }
    if (rit->second.wake) rit->second.wake();
    if (status == KVCache::ApplyStatus::kUnknownAddress) {
      job.failed = true;
    }
    ++job.acked;
    if (log_) {
      log_->Append({sched_->Now(), EventKind::kFrameAck, job.src, frame.layer,
                    static_cast<int64_t>(status == KVCache::ApplyStatus::kUnknownAddress
                                             ? AckStatus::kUnknownAddress
                                             : AckStatus::kOk),
                    static_cast<int64_t>(frame.seq_tag), ""});
    }
    MaybeFinish(job_id);
  });
}

void InMemoryFabric::CloseJob(uint64_t job_id) {
  auto it = jobs_.find(job_id);
  SPLITSERVE_ICHECK(it != jobs_.end(), "unknown transfer job");
  it->second.closed = true;
  MaybeFinish(job_id);
}

void InMemoryFabric::MaybeFinish(uint64_t job_id) {
  Job& job = jobs_.at(job_id);
  if (job.done || !job.closed || job.acked < job.submitted) return;
  job.done = true;
  JobCallback cb = std::move(job.on_done);
  bool ok = !job.failed;
  TimeMs t = sched_->Now();
  jobs_.erase(job_id);
  if (cb) cb(ok, t);
}

}  // namespace splitserve

/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/event_log.cc
 */
#include "splitserve/event_log.h"

#include "splitserve/errors.h"

namespace splitserve {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfPages: return "OutOfPages";
    case ErrorCode::kDuplicateSequence: return "DuplicateSequence";
    case ErrorCode::kUnknownSequence: return "UnknownSequence";
    case ErrorCode::kForkBeyondCommitted: return "ForkBeyondCommitted";
    case ErrorCode::kAddrMismatch: return "AddrMismatch";
    case ErrorCode::kMissingKV: return "MissingKV";
    case ErrorCode::kLayerOrderViolation: return "LayerOrderViolation";
    case ErrorCode::kCannotEvict: return "CannotEvict";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kUnknownAddress: return "UnknownAddress";
    case ErrorCode::kPeerUnreachable: return "PeerUnreachable";
    case ErrorCode::kNoEngines: return "NoEngines";
    case ErrorCode::kRoleMissing: return "RoleMissing";
    case ErrorCode::kNoOwner: return "NoOwner";
    case ErrorCode::kUnknownStrategy: return "UnknownStrategy";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kAborted: return "Aborted";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

bool IsRetryable(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfPages:
    case ErrorCode::kPeerUnreachable:
      return true;
    default:
      return false;
  }
}

const char* EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kArrival: return "arrival";
    case EventKind::kCallBegin: return "call_begin";
    case EventKind::kCallEnd: return "call_end";
    case EventKind::kStepBegin: return "step_begin";
    case EventKind::kStepEnd: return "step_end";
    case EventKind::kLayerComputeEnd: return "layer_compute_end";
    case EventKind::kFrameEnqueue: return "frame_enqueue";
    case EventKind::kFrameDeliver: return "frame_deliver";
    case EventKind::kFrameAck: return "frame_ack";
    case EventKind::kTokenEmit: return "token_emit";
    case EventKind::kFirstToken: return "first_token";
    case EventKind::kRequestDone: return "request_done";
    case EventKind::kRequestAborted: return "request_aborted";
    case EventKind::kStrategySet: return "strategy_set";
    case EventKind::kMigration: return "migration";
  }
  return "unknown";
}

void EventLog::Append(Event e) {
  std::lock_guard<std::mutex> lock(mu_);
  events_.push_back(std::move(e));
}

std::vector<Event> EventLog::Snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_;
}

size_t EventLog::Size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_.size();
}

void EventLog::Clear() {
  std::lock_guard<std::mutex> lock(mu_);
  events_.clear();
}

std::vector<Event> EventLog::OfKind(EventKind kind) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

}  // namespace splitserve

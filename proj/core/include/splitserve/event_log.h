/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/event_log.h
 * \brief Append-only event log used for invariant checks and metric replay.
 */
#ifndef SPLITSERVE_EVENT_LOG_H_
#define SPLITSERVE_EVENT_LOG_H_

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "splitserve/common.h"

namespace splitserve {

enum class EventKind {
  kArrival,
  kCallBegin,
  kCallEnd,
  kStepBegin,
  kStepEnd,
  kLayerComputeEnd,
  kFrameEnqueue,
  kFrameDeliver,
  kFrameAck,
  kTokenEmit,
  kFirstToken,
  kRequestDone,
  kRequestAborted,
  kStrategySet,
  kMigration,
};

const char* EventKindName(EventKind kind);

/*!
 * \brief One log record. The numeric payload fields a/b/c are
 *        kind-specific; see the emitting call sites.
 */
struct Event {
  TimeMs t = 0;
  EventKind kind;
  Rank engine = -1;
  int64_t a = 0;
  int64_t b = 0;
  int64_t c = 0;
  std::string tag;
};

class EventLog {
 public:
  void Append(Event e);
  std::vector<Event> Snapshot() const;
  size_t Size() const;
  void Clear();

  /*! \brief Events of one kind, in append order. */
  std::vector<Event> OfKind(EventKind kind) const;

 private:
  mutable std::mutex mu_;
  std::vector<Event> events_;
};

}  // namespace splitserve

#endif  // SPLITSERVE_EVENT_LOG_H_

/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/clock.h
 * \brief Clock abstraction: engines and routers take timestamps from a Clock
 *        so the same code runs under a virtual clock (simulation) or a
 *        monotonic wall clock (service mode).
 */
#ifndef SPLITSERVE_CLOCK_H_
#define SPLITSERVE_CLOCK_H_

#include <chrono>

#include "splitserve/common.h"

namespace splitserve {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimeMs NowMs() const = 0;
};

/*! \brief Virtual clock advanced by the simulation executor. */
class ManualClock : public Clock {
 public:
  TimeMs NowMs() const override { return now_; }
  void Advance(TimeMs to) { now_ = to; }

 private:
  TimeMs now_ = 0.0;
};

/*! \brief Monotonic wall clock, milliseconds since construction. */
class SteadyClock : public Clock {
 public:
  SteadyClock() : start_(std::chrono::steady_clock::now()) {}
  TimeMs NowMs() const override {
    auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace splitserve

#endif  // SPLITSERVE_CLOCK_H_

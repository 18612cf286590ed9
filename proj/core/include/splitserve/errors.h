/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/errors.h
 * \brief Structured errors surfaced by the engine APIs and internals.
 */
#ifndef SPLITSERVE_ERRORS_H_
#define SPLITSERVE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace splitserve {

enum class ErrorCode {
  kOutOfPages,
  kDuplicateSequence,
  kUnknownSequence,
  kForkBeyondCommitted,
  kAddrMismatch,
  kMissingKV,
  kLayerOrderViolation,
  kCannotEvict,
  kChecksumMismatch,
  kUnknownAddress,
  kPeerUnreachable,
  kNoEngines,
  kRoleMissing,
  kNoOwner,
  kUnknownStrategy,
  kInvalidArgument,
  kAborted,
  kInternal,
};

const char* ErrorCodeName(ErrorCode code);

/*! \brief Whether an API caller may retry the failed call as-is. */
bool IsRetryable(ErrorCode code);

/*! \brief Exception carrying {code, retryable, detail}. */
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const { return code_; }
  bool retryable() const { return IsRetryable(code_); }

 private:
  ErrorCode code_;
};

#define SPLITSERVE_CHECK(cond, code, detail)        \
  do {                                              \
    if (!(cond)) throw ::splitserve::Error(code, detail); \
  } while (0)

#define SPLITSERVE_ICHECK(cond, detail) \
  SPLITSERVE_CHECK(cond, ::splitserve::ErrorCode::kInternal, detail)

}  // namespace splitserve

#endif  // SPLITSERVE_ERRORS_H_

/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/common.h
 * \brief Basic aliases shared across the project.
 */
#ifndef SPLITSERVE_COMMON_H_
#define SPLITSERVE_COMMON_H_

#include <cstdint>
#include <vector>

namespace splitserve {

/*! \brief Tokens are opaque non-negative integers; there is no tokenizer. */
using Token = int32_t;
using TokenList = std::vector<Token>;

/*! \brief Engine-local sequence identifier. */
using SeqId = int64_t;

/*! \brief Engine rank within a deployment. */
using Rank = int32_t;

/*! \brief Virtual or wall-clock milliseconds. */
using TimeMs = double;

/*! \brief A half-open token-position range [begin, end). */
struct TokenRange {
  int64_t begin = 0;
  int64_t end = 0;

  int64_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const TokenRange&) const = default;
};

}  // namespace splitserve

#endif  // SPLITSERVE_COMMON_H_

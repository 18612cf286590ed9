/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/kv_addr.h
 * \brief Compressed description of allocated KV page/slot ranges, exchanged
 *        between engines through the router.
 */
#ifndef SPLITSERVE_KV_ADDR_H_
#define SPLITSERVE_KV_ADDR_H_

#include <cstdint>
#include <string>
#include <vector>

#include "splitserve/common.h"

namespace splitserve {

/*! \brief A run of consecutive slots within one page. */
struct SlotRange {
  int64_t page_id = 0;
  int32_t slot_begin = 0;
  int32_t slot_count = 0;
  bool operator==(const SlotRange&) const = default;
};

/*!
 * \brief Run-length encoded slot addresses covering the token positions
 *        [token_begin, token_begin + token_count) in order.
 */
struct KVAddrInfo {
  std::vector<SlotRange> ranges;
  int64_t token_begin = 0;
  int64_t token_count = 0;

  /*! \brief Checks the slot counts sum to token_count and ranges do not overlap. */
  void Validate() const;
  bool operator==(const KVAddrInfo&) const = default;

  /*! \brief Sub-address covering [begin, end) in token positions. */
  KVAddrInfo Slice(int64_t begin, int64_t end) const;

  std::string ToJson() const;
  static KVAddrInfo FromJson(const std::string& text);

  /*! \brief Compact little-endian binary encoding (used in wire frames). */
  void EncodeTo(std::vector<uint8_t>* out) const;
  static KVAddrInfo DecodeFrom(const uint8_t* data, size_t size, size_t* consumed);
};

}  // namespace splitserve

#endif  // SPLITSERVE_KV_ADDR_H_

/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/kv_addr.cc
 */
#include "splitserve/kv_addr.h"

#include <set>

#include "json.hpp"
#include "splitserve/errors.h"

namespace splitserve {

using nlohmann::json;

void KVAddrInfo::Validate() const {
  int64_t total = 0;
  std::set<std::pair<int64_t, int32_t>> seen;
  for (const auto& r : ranges) {
    SPLITSERVE_CHECK(r.slot_count > 0 && r.slot_begin >= 0, ErrorCode::kInvalidArgument,
                     "bad slot range");
    for (int32_t s = 0; s < r.slot_count; ++s) {
      bool fresh = seen.insert({r.page_id, r.slot_begin + s}).second;
      SPLITSERVE_CHECK(fresh, ErrorCode::kInvalidArgument, "overlapping slot ranges");
    }
    total += r.slot_count;
  }
  SPLITSERVE_CHECK(total == token_count, ErrorCode::kAddrMismatch,
                   "slot counts do not cover token_count");
}

KVAddrInfo KVAddrInfo::Slice(int64_t begin, int64_t end) const {
  SPLITSERVE_CHECK(begin >= token_begin && end <= token_begin + token_count && begin <= end,
                   ErrorCode::kInvalidArgument, "slice outside address");
  KVAddrInfo out;
  out.token_begin = begin;
  out.token_count = end - begin;
  int64_t pos = token_begin;
  for (const auto& r : ranges) {
    int64_t r_begin = pos;
    int64_t r_end = pos + r.slot_count;
    int64_t lo = std::max(r_begin, begin);
    int64_t hi = std::min(r_end, end);
    if (lo < hi) {
      out.ranges.push_back({r.page_id, static_cast<int32_t>(r.slot_begin + (lo - r_begin)),
                            static_cast<int32_t>(hi - lo)});
    }
    pos = r_end;
  }
  return out;
}

std::string KVAddrInfo::ToJson() const {
  json arr = json::array();
  for (const auto& r : ranges) arr.push_back({r.page_id, r.slot_begin, r.slot_count});
  json j{{"token_begin", token_begin}, {"token_count", token_count}, {"ranges", arr}};
  return j.dump();
}

KVAddrInfo KVAddrInfo::FromJson(const std::string& text) {
  json j = json::parse(text);
  KVAddrInfo out;
  out.token_begin = j.at("token_begin");
  out.token_count = j.at("token_count");
  for (const auto& r : j.at("ranges")) {
    out.ranges.push_back({r.at(0).get<int64_t>(), r.at(1).get<int32_t>(), r.at(2).get<int32_t>()});
  }
  out.Validate();
  return out;
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
  SPLITSERVE_CHECK(*pos + sizeof(T) <= size, ErrorCode::kInvalidArgument,
                   "truncated address encoding");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(data[*pos + i]) << (8 * i);
  *pos += sizeof(T);
  return static_cast<T>(v);
}
}  // namespace

void KVAddrInfo::EncodeTo(std::vector<uint8_t>* out) const {
  PutLE<uint64_t>(out, static_cast<uint64_t>(token_begin));
  PutLE<uint64_t>(out, static_cast<uint64_t>(token_count));
  PutLE<uint32_t>(out, static_cast<uint32_t>(ranges.size()));
  for (const auto& r : ranges) {
    PutLE<uint32_t>(out, static_cast<uint32_t>(r.page_id));
    PutLE<uint16_t>(out, static_cast<uint16_t>(r.slot_begin));
    PutLE<uint16_t>(out, static_cast<uint16_t>(r.slot_count));
  }
}

KVAddrInfo KVAddrInfo::DecodeFrom(const uint8_t* data, size_t size, size_t* consumed) {
  size_t pos = *consumed;
  KVAddrInfo out;
  out.token_begin = static_cast<int64_t>(GetLE<uint64_t>(data, size, &pos));
  out.token_count = static_cast<int64_t>(GetLE<uint64_t>(data, size, &pos));
  uint32_t n = GetLE<uint32_t>(data, size, &pos);
  out.ranges.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    SlotRange r;
    r.page_id = GetLE<uint32_t>(data, size, &pos);
    r.slot_begin = GetLE<uint16_t>(data, size, &pos);
    r.slot_count = GetLE<uint16_t>(data, size, &pos);
    out.ranges.push_back(r);
  }
  *consumed = pos;
  out.Validate();
  return out;
}

}  // namespace splitserve

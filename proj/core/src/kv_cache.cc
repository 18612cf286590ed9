/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/kv_cache.cc
 */
#include "splitserve/kv_cache.h"

#include <algorithm>

#include "splitserve/errors.h"

namespace splitserve {

int64_t ResolveEndIndex(int64_t len, int64_t end) {
  int64_t e = end < 0 ? len + end : end;
  SPLITSERVE_CHECK(end != 0, ErrorCode::kInvalidArgument, "end = 0 is invalid");
  SPLITSERVE_CHECK(e > 0 && e <= len, ErrorCode::kInvalidArgument, "end out of range");
  return e;
}

int64_t ResolveBeginIndex(int64_t len, int64_t begin) {
  int64_t b = begin < 0 ? len + begin : begin;
  SPLITSERVE_CHECK(b >= 0 && b <= len, ErrorCode::kInvalidArgument, "begin out of range");
  return b;
}

KVCache::KVCache(CacheConfig cache_config, const HashModel* model)
    : cache_config_(cache_config), model_(model) {
  cache_config_.Validate();
  layers_ = model_->config().layers;
  dim_ = model_->config().dim;
  const int32_t P = cache_config_.page_size;
  pages_.reserve(cache_config_.num_pages);
  free_pages_.reserve(cache_config_.num_pages);
  for (int64_t i = 0; i < cache_config_.num_pages; ++i) {
    auto page = std::make_unique<KVPage>();
    page->page_id = i;
    page->values.assign(static_cast<size_t>(P) * layers_ * dim_, 0);
    page->fill = std::make_unique<std::atomic<uint8_t>[]>(static_cast<size_t>(P) * layers_);
    for (int64_t k = 0; k < static_cast<int64_t>(P) * layers_; ++k) {
      page->fill[k].store(0, std::memory_order_relaxed);
    }
    page->expecting_remote.assign(P, 0);
    pages_.push_back(std::move(page));
  }
  // LIFO free list, lowest page first out.
  for (int64_t i = cache_config_.num_pages - 1; i >= 0; --i) free_pages_.push_back(i);
}

int64_t KVCache::BytesPerPage() const {
  return static_cast<int64_t>(cache_config_.page_size) * layers_ * dim_ * 8;
}

SequenceRecord* KVCache::MustGet(SeqId seq) {
  auto it = records_.find(seq);
  SPLITSERVE_CHECK(it != records_.end(), ErrorCode::kUnknownSequence,
                   "sequence " + std::to_string(seq));
  return it->second.get();
}

const SequenceRecord* KVCache::MustGet(SeqId seq) const {
  auto it = records_.find(seq);
  SPLITSERVE_CHECK(it != records_.end(), ErrorCode::kUnknownSequence,
                   "sequence " + std::to_string(seq));
  return it->second.get();
}

PlanSlotRef KVCache::Resolve(const SequenceRecord* rec, int64_t pos) const {
  const SequenceRecord* r = rec;
  while (pos < r->fork_len) {
    r = MustGet(r->parent);
  }
  int64_t idx = pos - r->fork_len;
  SPLITSERVE_ICHECK(idx < static_cast<int64_t>(r->own_pages.size()) * cache_config_.page_size,
                    "position not allocated");
  KVPage* page = pages_[r->own_pages[idx / cache_config_.page_size]].get();
  return {page, static_cast<int32_t>(idx % cache_config_.page_size)};
}

int64_t KVCache::PagesNeeded(const SequenceRecord* rec, int64_t upto) const {
  int64_t idx = upto - rec->fork_len;
  if (idx <= 0) return 0;
  int64_t pages = (idx + cache_config_.page_size - 1) / cache_config_.page_size;
  return std::max<int64_t>(0, pages - static_cast<int64_t>(rec->own_pages.size()));
}

void KVCache::AdvanceCommitted(SequenceRecord* rec) {
  int64_t pos = std::max(rec->committed_hint, rec->fork_len);
  while (pos < rec->alloc_len && pos < static_cast<int64_t>(rec->tokens.size())) {
    PlanSlotRef ref = Resolve(rec, pos);
    bool full = true;
    for (int32_t l = 0; l < layers_; ++l) {
      if (ref.page->fill[static_cast<size_t>(ref.slot) * layers_ + l].load(
              std::memory_order_acquire) == 0) {
        full = false;
        break;
      }
    }
    if (!full) break;
    ++pos;
  }
  rec->committed_hint = std::max(rec->committed_hint, pos);
}

void KVCache::TouchLru(SequenceRecord* rec) {
  if (tree_.Contains(rec->id)) {
    // Re-inserting the committed prefix refreshes the LRU stamp.
    int64_t n = std::min<int64_t>(rec->committed_hint, rec->tokens.size());
    if (n > 0) tree_.Insert(std::span<const Token>(rec->tokens.data(), n), rec->id);
  }
}

int64_t KVCache::MatchPrefix(std::span<const Token> tokens) {
  return tree_.MatchPrefix(tokens).match_len;
}

RadixTree::MatchResult KVCache::MatchPrefixSeq(std::span<const Token> tokens) {
  return tree_.MatchPrefix(tokens);
}

SequenceRecord* KVCache::CreateSequence(SeqId seq_id, TokenList tokens) {
  SPLITSERVE_CHECK(records_.find(seq_id) == records_.end(), ErrorCode::kDuplicateSequence,
                   "sequence " + std::to_string(seq_id));
  auto rec = std::make_unique<SequenceRecord>();
  rec->id = seq_id;
  rec->tokens = std::move(tokens);
  rec->fold_sums.assign(layers_, 0);
  rec->prefix_digest = model_->InitialPrefixDigest();
  SequenceRecord* out = rec.get();
  records_[seq_id] = std::move(rec);
  return out;
}

SequenceRecord* KVCache::ForkSequence(SeqId parent, SeqId child, int64_t fork_len,
                                      TokenList child_tokens) {
  SequenceRecord* p = MustGet(parent);
  SPLITSERVE_CHECK(records_.find(child) == records_.end(), ErrorCode::kDuplicateSequence,
                   "sequence " + std::to_string(child));
  AdvanceCommitted(p);
  SPLITSERVE_CHECK(fork_len <= p->committed_hint, ErrorCode::kForkBeyondCommitted,
                   "fork_len " + std::to_string(fork_len) + " > committed " +
                       std::to_string(p->committed_hint));
  if (child_tokens.empty()) {
    child_tokens.assign(p->tokens.begin(), p->tokens.begin() + fork_len);
  } else {
    SPLITSERVE_CHECK(static_cast<int64_t>(child_tokens.size()) >= fork_len,
                     ErrorCode::kInvalidArgument, "child tokens shorter than fork_len");
    for (int64_t i = 0; i < fork_len; ++i) {
      SPLITSERVE_CHECK(child_tokens[i] == p->tokens[i], ErrorCode::kInvalidArgument,
                       "child tokens diverge inside the fork prefix");
    }
  }
  auto rec = std::make_unique<SequenceRecord>();
  rec->id = child;
  rec->tokens = std::move(child_tokens);
  rec->parent = fork_len > 0 ? parent : -1;
  rec->fork_len = fork_len;
  rec->alloc_len = fork_len;
  rec->committed_hint = fork_len;
  rec->fold_sums.assign(layers_, 0);
  rec->prefix_digest = model_->InitialPrefixDigest();
  if (rec->parent >= 0) ++p->refcount;
  SequenceRecord* out = rec.get();
  records_[child] = std::move(rec);
  TouchLru(p);
  return out;
}

void KVCache::EnsureAllocated(SeqId seq, int64_t upto) {
  SequenceRecord* rec = MustGet(seq);
  SPLITSERVE_CHECK(upto <= static_cast<int64_t>(rec->tokens.size()), ErrorCode::kInvalidArgument,
                   "allocation beyond known tokens");
  int64_t need = PagesNeeded(rec, upto);
  SPLITSERVE_CHECK(need <= static_cast<int64_t>(free_pages_.size()), ErrorCode::kOutOfPages,
                   std::to_string(need) + " pages needed, " +
                       std::to_string(free_pages_.size()) + " free");
  for (int64_t i = 0; i < need; ++i) {
    int64_t page_id = free_pages_.back();
    free_pages_.pop_back();
    pages_[page_id]->owner = seq;
    rec->own_pages.push_back(page_id);
  }
  rec->alloc_len = rec->fork_len + static_cast<int64_t>(rec->own_pages.size()) * cache_config_.page_size;
}

void KVCache::AppendToken(SeqId seq, Token t) { MustGet(seq)->tokens.push_back(t); }

KVCache::PrepRecvResult KVCache::PrepRecv(SeqId seq_id, TokenList tokens, int64_t end) {
  SPLITSERVE_CHECK(!tokens.empty(), ErrorCode::kInvalidArgument, "empty prompt");
  SPLITSERVE_CHECK(records_.find(seq_id) == records_.end(), ErrorCode::kDuplicateSequence,
                   "sequence " + std::to_string(seq_id));
  int64_t e = ResolveEndIndex(static_cast<int64_t>(tokens.size()), end);

  auto match = tree_.MatchPrefix(std::span<const Token>(tokens.data(), e));
  int64_t m = match.match_len;

  // All-or-nothing: fail before any state change when capacity is short.
  int64_t pages_needed = (e - m + cache_config_.page_size - 1) / cache_config_.page_size;
  SPLITSERVE_CHECK(pages_needed <= static_cast<int64_t>(free_pages_.size()),
                   ErrorCode::kOutOfPages,
                   std::to_string(pages_needed) + " pages needed, " +
                       std::to_string(free_pages_.size()) + " free");

  SequenceRecord* rec;
  if (m > 0) {
    rec = ForkSequence(match.seq, seq_id, m, std::move(tokens));
  } else {
    rec = CreateSequence(seq_id, std::move(tokens));
  }
  EnsureAllocated(seq_id, e);

  PrepRecvResult result;
  result.match_len = m;
  result.addr = BuildAddr(seq_id, {m, e});

  {
    std::lock_guard<std::mutex> lock(recv_mu_);
    for (int64_t pos = m; pos < e; ++pos) {
      PlanSlotRef ref = Resolve(rec, pos);
      ref.page->expecting_remote[ref.slot] = 1;
    }
    if (e > m) {
      SequenceRecord::ReceiveWindow window;
      window.range = {m, e};
      window.expected_writes = (e - m) * layers_;
      rec->window = std::move(window);
    }
  }
  return result;
}

void KVCache::MarkSend(SeqId seq, TokenRange range, Rank dest, KVAddrInfo dest_addr,
                       uint64_t user_tag) {
  SequenceRecord* rec = MustGet(seq);
  SPLITSERVE_CHECK(range.begin >= 0 && range.end <= static_cast<int64_t>(rec->tokens.size()) &&
                       range.begin <= range.end,
                   ErrorCode::kInvalidArgument, "send range outside sequence");
  SPLITSERVE_CHECK(dest_addr.token_count == range.size(), ErrorCode::kAddrMismatch,
                   "destination covers " + std::to_string(dest_addr.token_count) +
                       " tokens, range has " + std::to_string(range.size()));
  SPLITSERVE_CHECK(dest_addr.token_begin == range.begin, ErrorCode::kAddrMismatch,
                   "destination token_begin mismatch");
  pending_sends_.push_back({seq, range, dest, std::move(dest_addr), user_tag});
}

ForwardPlan KVCache::BeginForward(const std::vector<BatchEntry>& batch) {
  ForwardPlan plan;
  std::set<SeqId> seen;
  for (const BatchEntry& entry : batch) {
    SequenceRecord* rec = MustGet(entry.seq);
    SPLITSERVE_ICHECK(seen.insert(entry.seq).second, "sequence batched twice");
    const int64_t n = static_cast<int64_t>(rec->tokens.size());
    SPLITSERVE_CHECK(entry.range.begin >= 0 && entry.range.begin < entry.range.end &&
                         entry.range.end <= n,
                     ErrorCode::kInvalidArgument, "bad forward range");
    AdvanceCommitted(rec);
    SPLITSERVE_CHECK(rec->committed_hint >= entry.range.begin, ErrorCode::kMissingKV,
                     "position " + std::to_string(rec->committed_hint) +
                         " is empty before prefill begin " + std::to_string(entry.range.begin));
    SPLITSERVE_ICHECK(rec->alloc_len >= entry.range.end, "forward range not allocated");
    SPLITSERVE_ICHECK(rec->fold_frontier <= entry.range.begin, "fold frontier beyond range");
    SPLITSERVE_ICHECK(rec->digest_len <= entry.range.begin, "digest beyond range");

    PlanEntry pe;
    pe.seq = entry.seq;
    pe.is_decode = entry.is_decode;
    pe.range = entry.range;
    pe.fold_from = rec->fold_frontier;
    pe.slots.reserve(entry.range.end - pe.fold_from);
    for (int64_t pos = pe.fold_from; pos < entry.range.end; ++pos) {
      pe.slots.push_back(Resolve(rec, pos));
    }
    // Advance the prefix digest through range.end, recording per-position digests.
    while (rec->digest_len < entry.range.end) {
      rec->prefix_digest = model_->ExtendPrefixDigest(rec->prefix_digest,
                                                      rec->tokens[rec->digest_len]);
      ++rec->digest_len;
      if (rec->digest_len > entry.range.begin) pe.digests.push_back(rec->prefix_digest);
    }
    pe.tokens.assign(rec->tokens.begin() + entry.range.begin,
                     rec->tokens.begin() + entry.range.end);
    plan.total_outputs += entry.range.size();
    plan.entries.push_back(std::move(pe));
  }

  // Fold pending sends for batched sequences into the plan.
  for (auto it = pending_sends_.begin(); it != pending_sends_.end();) {
    if (!seen.count(it->seq)) {
      ++it;
      continue;
    }
    PlanSend send;
    send.seq = it->seq;
    send.range = it->range;
    send.dest = it->dest;
    send.dest_addr = std::move(it->dest_addr);
    send.user_tag = it->user_tag;
    SequenceRecord* rec = MustGet(send.seq);
    send.slots.reserve(send.range.size());
    for (int64_t pos = send.range.begin; pos < send.range.end; ++pos) {
      send.slots.push_back(Resolve(rec, pos));
    }
    plan.sends.push_back(std::move(send));
    it = pending_sends_.erase(it);
  }
  return plan;
}

std::vector<uint64_t> KVCache::Attention(int32_t layer, ForwardPlan* plan,
                                         std::span<const uint64_t> hidden_in,
                                         const FrameSink& sink) {
  SPLITSERVE_CHECK(layer == plan->next_layer && layer < layers_,
                   ErrorCode::kLayerOrderViolation,
                   "expected layer " + std::to_string(plan->next_layer) + ", got " +
                       std::to_string(layer));
  SPLITSERVE_ICHECK(hidden_in.size() == static_cast<size_t>(plan->total_outputs),
                    "hidden input size mismatch");
  std::vector<uint64_t> hidden_out(plan->total_outputs);

  size_t idx = 0;
  for (PlanEntry& entry : plan->entries) {
    SequenceRecord* rec = MustGet(entry.seq);
    uint64_t sum = rec->fold_sums[layer];
    for (int64_t pos = entry.fold_from; pos < entry.range.end; ++pos) {
      const PlanSlotRef& ref = entry.slots[pos - entry.fold_from];
      std::atomic<uint8_t>& fill = ref.page->fill[static_cast<size_t>(ref.slot) * layers_ + layer];
      uint64_t* words =
          ref.page->values.data() + (static_cast<size_t>(ref.slot) * layers_ + layer) * dim_;
      if (pos >= entry.range.begin) {
        if (fill.load(std::memory_order_acquire) == static_cast<uint8_t>(FillState::kEmpty)) {
          // Compute this position's KV; re-prefill of filled slots is skipped.
          model_->KvEntryWords(entry.digests[pos - entry.range.begin], layer,
                               std::span<uint64_t>(words, dim_));
          fill.store(static_cast<uint8_t>(FillState::kComputedLocal), std::memory_order_release);
        }
        sum += model_->EntryDigest(std::span<const uint64_t>(words, dim_));
        uint64_t x = hidden_in[idx];
        hidden_out[idx] = model_->NextHidden(x, model_->AttentionOut(x, pos + 1, sum));
        ++idx;
      } else {
        SPLITSERVE_CHECK(fill.load(std::memory_order_acquire) !=
                             static_cast<uint8_t>(FillState::kEmpty),
                         ErrorCode::kMissingKV, "fold over empty slot");
        sum += model_->EntryDigest(std::span<const uint64_t>(words, dim_));
      }
    }
    rec->fold_sums[layer] = sum;
    if (layer == layers_ - 1) {
      rec->fold_frontier = entry.range.end;
      AdvanceCommitted(rec);
    }
  }

  // Stream this layer's KV for every marked send now that writes are done.
  for (const PlanSend& send : plan->sends) {
    std::vector<uint64_t> payload;
    payload.reserve(send.slots.size() * dim_);
    for (const PlanSlotRef& ref : send.slots) {
      SPLITSERVE_CHECK(ref.page->fill[static_cast<size_t>(ref.slot) * layers_ + layer].load(
                           std::memory_order_acquire) !=
                           static_cast<uint8_t>(FillState::kEmpty),
                       ErrorCode::kMissingKV, "sending empty slot");
      const uint64_t* words =
          ref.page->values.data() + (static_cast<size_t>(ref.slot) * layers_ + layer) * dim_;
      payload.insert(payload.end(), words, words + dim_);
    }
    if (sink) sink(layer, send, std::move(payload));
  }

  ++plan->next_layer;
  return hidden_out;
}

std::vector<uint64_t> KVCache::GatherRange(SeqId seq, TokenRange range, int32_t layer) {
  SequenceRecord* rec = MustGet(seq);
  std::vector<uint64_t> payload;
  payload.reserve(range.size() * dim_);
  for (int64_t pos = range.begin; pos < range.end; ++pos) {
    PlanSlotRef ref = Resolve(rec, pos);
    SPLITSERVE_CHECK(ref.page->fill[static_cast<size_t>(ref.slot) * layers_ + layer].load(
                         std::memory_order_acquire) != static_cast<uint8_t>(FillState::kEmpty),
                     ErrorCode::kMissingKV, "gather over empty slot");
    const uint64_t* words =
        ref.page->values.data() + (static_cast<size_t>(ref.slot) * layers_ + layer) * dim_;
    payload.insert(payload.end(), words, words + dim_);
  }
  return payload;
}

KVAddrInfo KVCache::BuildAddr(SeqId seq, TokenRange range) {
  SequenceRecord* rec = MustGet(seq);
  SPLITSERVE_CHECK(range.begin >= rec->fork_len, ErrorCode::kInvalidArgument,
                   "address must cover own slots only");
  KVAddrInfo addr;
  addr.token_begin = range.begin;
  addr.token_count = range.size();
  for (int64_t pos = range.begin; pos < range.end; ++pos) {
    PlanSlotRef ref = Resolve(rec, pos);
    if (!addr.ranges.empty() && addr.ranges.back().page_id == ref.page->page_id &&
        addr.ranges.back().slot_begin + addr.ranges.back().slot_count == ref.slot) {
      ++addr.ranges.back().slot_count;
    } else {
      addr.ranges.push_back({ref.page->page_id, ref.slot, 1});
    }
  }
  addr.Validate();
  return addr;
}

KVCache::ApplyStatus KVCache::ApplyRemoteWrite(const KVAddrInfo& addr, int32_t layer,
                                               std::span<const uint64_t> payload, uint64_t tag) {
  SPLITSERVE_CHECK(static_cast<int64_t>(payload.size()) == addr.token_count * dim_,
                   ErrorCode::kInvalidArgument, "payload size mismatch");
  std::lock_guard<std::mutex> lock(recv_mu_);

  // Validate first: every addressed slot must belong to one receive window.
  SeqId owner = -1;
  for (const SlotRange& r : addr.ranges) {
    if (r.page_id < 0 || r.page_id >= static_cast<int64_t>(pages_.size())) {
      return ApplyStatus::kUnknownAddress;
    }
    KVPage* page = pages_[r.page_id].get();
    if (page->owner < 0) return ApplyStatus::kUnknownAddress;
    if (owner == -1) owner = page->owner;
    if (page->owner != owner) return ApplyStatus::kUnknownAddress;
    for (int32_t s = r.slot_begin; s < r.slot_begin + r.slot_count; ++s) {
      if (s < 0 || s >= cache_config_.page_size || !page->expecting_remote[s]) {
        return ApplyStatus::kUnknownAddress;
      }
    }
  }
  auto it = records_.find(owner);
  if (it == records_.end() || !it->second->window.has_value()) {
    return ApplyStatus::kUnknownAddress;
  }
  SequenceRecord* rec = it->second.get();
  auto& window = *rec->window;

  if (!window.applied.insert({tag, layer, addr.token_begin}).second) {
    return ApplyStatus::kDuplicate;
  }

  size_t word = 0;
  for (const SlotRange& r : addr.ranges) {
    KVPage* page = pages_[r.page_id].get();
    for (int32_t s = r.slot_begin; s < r.slot_begin + r.slot_count; ++s) {
      std::atomic<uint8_t>& fill = page->fill[static_cast<size_t>(s) * layers_ + layer];
      if (fill.load(std::memory_order_acquire) == static_cast<uint8_t>(FillState::kEmpty)) {
        uint64_t* dst = page->values.data() + (static_cast<size_t>(s) * layers_ + layer) * dim_;
        std::copy(payload.begin() + word, payload.begin() + word + dim_, dst);
        fill.store(static_cast<uint8_t>(FillState::kReceivedRemote), std::memory_order_release);
      }
      // A slot the engine already computed keeps its local value; the bytes
      // are identical by construction and the transition stays monotone.
      word += dim_;
      ++window.received_writes;
    }
  }
  if (!window.complete && window.received_writes >= window.expected_writes) {
    window.complete = true;
    completed_windows_.push_back(owner);
  }
  return ApplyStatus::kOk;
}

std::vector<SeqId> KVCache::DrainReceiveCompletions() {
  std::vector<SeqId> done;
  {
    std::lock_guard<std::mutex> lock(recv_mu_);
    done.swap(completed_windows_);
  }
  for (SeqId seq : done) {
    auto it = records_.find(seq);
    if (it == records_.end()) continue;
    SequenceRecord* rec = it->second.get();
    AdvanceCommitted(rec);
    rec->finished = true;
    CommitToTree(seq);
  }
  return done;
}

void KVCache::SetFinished(SeqId seq, bool finished) { MustGet(seq)->finished = finished; }

void KVCache::CommitToTree(SeqId seq) {
  SequenceRecord* rec = MustGet(seq);
  AdvanceCommitted(rec);
  int64_t n = std::min<int64_t>(rec->committed_hint, rec->tokens.size());
  if (n <= 0) return;
  tree_.Insert(std::span<const Token>(rec->tokens.data(), n), seq);
}

void KVCache::FreeSequence(SeqId seq) {
  SequenceRecord* rec = MustGet(seq);
  SPLITSERVE_CHECK(rec->refcount == 0, ErrorCode::kInternal,
                   "freeing a sequence with live children");
  {
    std::lock_guard<std::mutex> lock(recv_mu_);
    rec->window.reset();
    for (int64_t page_id : rec->own_pages) {
      KVPage* page = pages_[page_id].get();
      page->owner = -1;
      std::fill(page->expecting_remote.begin(), page->expecting_remote.end(), 0);
      for (int64_t k = 0; k < static_cast<int64_t>(cache_config_.page_size) * layers_; ++k) {
        page->fill[k].store(0, std::memory_order_relaxed);
      }
      free_pages_.push_back(page_id);
    }
  }
  if (rec->parent >= 0) {
    auto it = records_.find(rec->parent);
    if (it != records_.end()) --it->second->refcount;
  }
  for (auto it = pending_sends_.begin(); it != pending_sends_.end();) {
    it = it->seq == seq ? pending_sends_.erase(it) : std::next(it);
  }
  tree_.Remove(seq);
  records_.erase(seq);
}

int64_t KVCache::Evict(int64_t bytes_needed) {
  if (bytes_needed <= 0) return 0;
  int64_t freed_tokens = 0;
  auto satisfied = [&] {
    return static_cast<int64_t>(free_pages_.size()) * BytesPerPage() >= bytes_needed;
  };
  while (!satisfied()) {
    SeqId victim = -1;
    for (SeqId seq : tree_.SequencesByLru()) {
      auto it = records_.find(seq);
      if (it == records_.end()) continue;
      const SequenceRecord* rec = it->second.get();
      if (!rec->finished || rec->refcount != 0) continue;
      if (rec->own_pages.empty()) continue;
      if (tree_.HasPinnedNode(seq)) continue;
      victim = seq;
      break;
    }
    SPLITSERVE_CHECK(victim >= 0, ErrorCode::kCannotEvict,
                     "all remaining sequences are pinned or live");
    const SequenceRecord* rec = records_.at(victim).get();
    freed_tokens += std::max<int64_t>(
        0, std::min<int64_t>(rec->tokens.size(), rec->alloc_len) - rec->fork_len);
    FreeSequence(victim);
  }
  return freed_tokens;
}

void KVCache::Pin(std::span<const Token> prefix, bool flag) { tree_.Pin(prefix, flag); }

bool KVCache::HasSequence(SeqId seq) const { return records_.count(seq) > 0; }

const SequenceRecord* KVCache::GetRecord(SeqId seq) const { return MustGet(seq); }

int64_t KVCache::Committed(SeqId seq) {
  SequenceRecord* rec = MustGet(seq);
  AdvanceCommitted(rec);
  return rec->committed_hint;
}

std::vector<uint64_t> KVCache::ReadEntryWords(SeqId seq, int64_t pos, int32_t layer) {
  SequenceRecord* rec = MustGet(seq);
  PlanSlotRef ref = Resolve(rec, pos);
  const uint64_t* words =
      ref.page->values.data() + (static_cast<size_t>(ref.slot) * layers_ + layer) * dim_;
  return std::vector<uint64_t>(words, words + dim_);
}

FillState KVCache::FillOf(SeqId seq, int64_t pos, int32_t layer) {
  SequenceRecord* rec = MustGet(seq);
  PlanSlotRef ref = Resolve(rec, pos);
  return static_cast<FillState>(
      ref.page->fill[static_cast<size_t>(ref.slot) * layers_ + layer].load(
          std::memory_order_acquire));
}

std::vector<SeqId> KVCache::SequenceIds() const {
  std::vector<SeqId> out;
  out.reserve(records_.size());
  for (const auto& [id, rec] : records_) out.push_back(id);
  return out;
}

}  // namespace splitserve

/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/kv_cache.h
 * \brief Paged KV storage with a decoupled radix-tree context cache.
 *
 * The cache exposes a two-stage interface. Declaration: prep_recv registers
 * receive windows, mark_send declares pending transfers, begin_forward plans
 * slot addressing once for all layers. Computation: attention() writes and
 * folds KV per layer, streaming marked ranges right after each layer's
 * writes complete.
 *
 * All cache-mutating calls are serialized by one logical executor per
 * engine. ApplyRemoteWrite is the exception: the transfer agent may call it
 * concurrently, but it only writes slots pre-marked expecting-remote, flips
 * Empty -> ReceivedRemote, and never touches the radix tree.
 */
#ifndef SPLITSERVE_KV_CACHE_H_
#define SPLITSERVE_KV_CACHE_H_

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "splitserve/common.h"
#include "splitserve/config.h"
#include "splitserve/hash_model.h"
#include "splitserve/kv_addr.h"
#include "splitserve/radix_tree.h"

namespace splitserve {

enum class FillState : uint8_t {
  kEmpty = 0,
  kComputedLocal = 1,
  kReceivedRemote = 2,
};

/*! \brief One page: page_size slots, each slot spanning all layers (layer-major within slot). */
struct KVPage {
  int64_t page_id = -1;
  SeqId owner = -1;
  std::vector<uint64_t> values;                    // [slot][layer][word]
  std::unique_ptr<std::atomic<uint8_t>[]> fill;    // [slot][layer]
  std::vector<uint8_t> expecting_remote;           // [slot]
};

/*! \brief Per-sequence KV layout, fill state and context-cache linkage. */
struct SequenceRecord {
  SeqId id = -1;
  TokenList tokens;
  SeqId parent = -1;
  int64_t fork_len = 0;      // positions < fork_len resolve through the parent
  int32_t refcount = 0;      // children sharing our pages
  std::vector<int64_t> own_pages;
  int64_t alloc_len = 0;     // positions < alloc_len have slots
  int64_t committed_hint = 0;  // positions < hint are non-Empty on all layers
  bool finished = false;     // no further writes expected; evictable at refcount 0

  // Incremental attention state (executor-owned).
  int64_t fold_frontier = 0;
  std::vector<uint64_t> fold_sums;  // per layer, over positions < fold_frontier
  uint64_t prefix_digest = 0;
  int64_t digest_len = 0;

  // Open receive window, when awaiting a transfer.
  struct ReceiveWindow {
    TokenRange range;
    int64_t expected_writes = 0;  // range.size * layers
    int64_t received_writes = 0;
    bool complete = false;
    std::set<std::tuple<uint64_t, int32_t, int64_t>> applied;  // (tag, layer, token_begin)
  };
  std::optional<ReceiveWindow> window;
};

/*! \brief One batched request for begin_forward. */
struct BatchEntry {
  SeqId seq = -1;
  TokenRange range;  // positions to process; decode steps use [n-1, n)
  bool is_decode = false;
};

struct PlanSlotRef {
  KVPage* page = nullptr;
  int32_t slot = 0;
};

struct PlanEntry {
  SeqId seq = -1;
  bool is_decode = false;
  TokenRange range;       // output positions
  int64_t fold_from = 0;  // first position not yet folded (<= range.begin)
  std::vector<PlanSlotRef> slots;    // for positions [fold_from, range.end)
  std::vector<uint64_t> digests;     // prefix digests for positions [range.begin, range.end)
  TokenList tokens;                  // tokens at positions [range.begin, range.end)
};

struct PlanSend {
  SeqId seq = -1;
  TokenRange range;
  Rank dest = -1;
  KVAddrInfo dest_addr;
  uint64_t user_tag = 0;
  std::vector<PlanSlotRef> slots;  // local slots for range
};

/*! \brief Built once per step by begin_forward; immutable during the step. */
struct ForwardPlan {
  std::vector<PlanEntry> entries;
  std::vector<PlanSend> sends;
  int32_t next_layer = 0;
  int64_t total_outputs = 0;
};

/*! \brief Receives gathered payloads for marked sends, once per layer. */
using FrameSink =
    std::function<void(int32_t layer, const PlanSend& send, std::vector<uint64_t> payload)>;

/*! \brief Resolves end indices with Python-slice semantics; end = 0 is invalid. */
int64_t ResolveEndIndex(int64_t len, int64_t end);
/*! \brief Resolves begin indices (negative counts from the back). */
int64_t ResolveBeginIndex(int64_t len, int64_t begin);

class KVCache {
 public:
  KVCache(CacheConfig cache_config, const HashModel* model);

  //--------------------------------------------------------------------
  // Declaration stage
  //--------------------------------------------------------------------
  /*! \brief Longest committed prefix of `tokens`; touches LRU, never allocates. */
  int64_t MatchPrefix(std::span<const Token> tokens);
  RadixTree::MatchResult MatchPrefixSeq(std::span<const Token> tokens);

  struct PrepRecvResult {
    int64_t match_len = 0;
    KVAddrInfo addr;
  };
  /*!
   * \brief Allocates Empty slots marked expecting-remote for the unmatched
   *        positions of tokens[:end], forking the matched prefix. Atomic:
   *        throws OutOfPages without side effects when capacity is short.
   */
  PrepRecvResult PrepRecv(SeqId seq_id, TokenList tokens, int64_t end);

  /*! \brief Shares the parent's first fork_len positions with a new child. */
  SequenceRecord* ForkSequence(SeqId parent, SeqId child, int64_t fork_len,
                               TokenList child_tokens = {});

  /*! \brief Fresh sequence with no parent. */
  SequenceRecord* CreateSequence(SeqId seq_id, TokenList tokens);

  /*! \brief Declares a pending transfer consumed by the next begin_forward. */
  void MarkSend(SeqId seq, TokenRange range, Rank dest, KVAddrInfo dest_addr,
                uint64_t user_tag = 0);

  /*! \brief Allocates own slots so positions < upto are addressable. */
  void EnsureAllocated(SeqId seq, int64_t upto);

  /*! \brief Appends a generated token (decode path); does not allocate. */
  void AppendToken(SeqId seq, Token t);

  ForwardPlan BeginForward(const std::vector<BatchEntry>& batch);

  //--------------------------------------------------------------------
  // Computation stage
  //--------------------------------------------------------------------
  /*!
   * \brief Runs one attention layer over the plan: writes KV for still-empty
   *        planned positions, folds stored entries into hidden outputs, and
   *        hands marked-send payloads for this layer to `sink`.
   *        Layers must be called in ascending order exactly once per plan.
   */
  std::vector<uint64_t> Attention(int32_t layer, ForwardPlan* plan,
                                  std::span<const uint64_t> hidden_in, const FrameSink& sink);

  /*! \brief Gathers stored words for [range) at `layer` (direct sends, tests). */
  std::vector<uint64_t> GatherRange(SeqId seq, TokenRange range, int32_t layer);

  /*! \brief Own-slot address info covering [range) of `seq`. */
  KVAddrInfo BuildAddr(SeqId seq, TokenRange range);

  //--------------------------------------------------------------------
  // Transfer agent surface (thread-safe; never touches the radix tree)
  //--------------------------------------------------------------------
  enum class ApplyStatus { kOk, kDuplicate, kUnknownAddress };
  ApplyStatus ApplyRemoteWrite(const KVAddrInfo& addr, int32_t layer,
                               std::span<const uint64_t> payload, uint64_t tag);

  /*! \brief Windows that filled completely since the last drain (executor only). */
  std::vector<SeqId> DrainReceiveCompletions();

  //--------------------------------------------------------------------
  // Lifecycle, eviction, pinning
  //--------------------------------------------------------------------
  void SetFinished(SeqId seq, bool finished);
  /*! \brief Inserts the committed prefix into the radix tree. */
  void CommitToTree(SeqId seq);
  /*! \brief Frees a record and its pages; refcount must be zero. */
  void FreeSequence(SeqId seq);

  /*!
   * \brief Frees unpinned, zero-refcount finished sequences in LRU order until
   *        bytes_needed is satisfiable. Returns freed token count; throws
   *        CannotEvict when the remaining candidates cannot satisfy it.
   */
  int64_t Evict(int64_t bytes_needed);

  void Pin(std::span<const Token> prefix, bool flag);

  //--------------------------------------------------------------------
  // Queries
  //--------------------------------------------------------------------
  bool HasSequence(SeqId seq) const;
  const SequenceRecord* GetRecord(SeqId seq) const;
  /*! \brief Advances and returns the committed frontier (all-layer non-Empty). */
  int64_t Committed(SeqId seq);
  std::vector<uint64_t> ReadEntryWords(SeqId seq, int64_t pos, int32_t layer);
  FillState FillOf(SeqId seq, int64_t pos, int32_t layer);
  int64_t FreePages() const { return static_cast<int64_t>(free_pages_.size()); }
  int64_t TotalPages() const { return cache_config_.num_pages; }
  int64_t BytesPerPage() const;
  size_t SequenceCount() const { return records_.size(); }
  std::vector<SeqId> SequenceIds() const;
  size_t PendingSendCount() const { return pending_sends_.size(); }
  const RadixTree& Tree() const { return tree_; }
  const CacheConfig& cache_config() const { return cache_config_; }

 private:
  struct PendingSend {
    SeqId seq;
    TokenRange range;
    Rank dest;
    KVAddrInfo dest_addr;
    uint64_t user_tag;
  };

  SequenceRecord* MustGet(SeqId seq);
  const SequenceRecord* MustGet(SeqId seq) const;
  PlanSlotRef Resolve(const SequenceRecord* rec, int64_t pos) const;
  int64_t PagesNeeded(const SequenceRecord* rec, int64_t upto) const;
  void AdvanceCommitted(SequenceRecord* rec);
  void TouchLru(SequenceRecord* rec);

  CacheConfig cache_config_;
  const HashModel* model_;
  int32_t layers_;
  int32_t dim_;

  std::vector<std::unique_ptr<KVPage>> pages_;
  std::vector<int64_t> free_pages_;
  std::map<SeqId, std::unique_ptr<SequenceRecord>> records_;
  std::deque<PendingSend> pending_sends_;
  RadixTree tree_;

  std::mutex recv_mu_;  // guards windows and expecting flags vs the transfer agent
  std::vector<SeqId> completed_windows_;
};

}  // namespace splitserve

#endif  // SPLITSERVE_KV_CACHE_H_

/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/radix_tree.h
 * \brief Token-level prefix index over committed sequences.
 *
 * The tree decouples context-cache management from KV storage: it only maps
 * token prefixes to the sequence that holds their KV. Node splitting is
 * internal; matching is token-exact.
 */
#ifndef SPLITSERVE_RADIX_TREE_H_
#define SPLITSERVE_RADIX_TREE_H_

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "splitserve/common.h"

namespace splitserve {

class RadixTree {
 public:
  struct MatchResult {
    int64_t match_len = 0;
    SeqId seq = -1;  // a sequence whose first match_len tokens equal the query's
  };

  RadixTree();
  ~RadixTree();
  RadixTree(const RadixTree&) = delete;
  RadixTree& operator=(const RadixTree&) = delete;

  /*!
   * \brief Longest cached prefix of `tokens`. Touches LRU stamps on the path;
   *        never allocates cache storage. Empty tree matches 0.
   */
  MatchResult MatchPrefix(std::span<const Token> tokens);

  /*!
   * \brief Associates `tokens` with `seq`. Traversed nodes are re-pointed to
   *        `seq` so interior references always name a live sequence.
   *        The caller guarantees `seq` has committed KV for all of `tokens`.
   */
  void Insert(std::span<const Token> tokens, SeqId seq);

  /*! \brief Removes all nodes referencing `seq`, re-pointing shared interior spans. */
  void Remove(SeqId seq);

  /*! \brief Pins (or unpins) the node path covering `prefix`. */
  void Pin(std::span<const Token> prefix, bool flag);

  /*! \brief True if any node referencing `seq` is pinned (blocks local eviction). */
  bool HasPinnedNode(SeqId seq) const;

  bool Contains(SeqId seq) const;
  /*! \brief Logical LRU stamp of the most recent touch involving `seq` (0 if none). */
  uint64_t LastTouch(SeqId seq) const;
  /*! \brief Sequence ids ordered least-recently-touched first. */
  std::vector<SeqId> SequencesByLru() const;

  size_t NodeCount() const;

 private:
  struct Node;
  std::unique_ptr<Node> root_;
  uint64_t clock_ = 0;
  std::map<SeqId, uint64_t> touch_;

  void TouchSeq(SeqId seq);
};

}  // namespace splitserve

#endif  // SPLITSERVE_RADIX_TREE_H_

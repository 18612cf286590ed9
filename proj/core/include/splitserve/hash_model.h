/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/hash_model.h
 * \brief Deterministic stand-in for the LLM.
 *
 * KV entries, attention outputs and next-token choice are pure functions of
 * the token prefix, derived from a fixed 64-bit FNV-1a hash over a canonical
 * little-endian byte encoding. The definitions below are the contract; any
 * two implementations of them agree byte-for-byte on every platform.
 *
 *   prefix digest   P(-1) = fnv(seed, TAG_PREFIX)
 *                   P(i)  = fnv(P(i-1), token_i as u32le)
 *   kv entry word   w(i, l, j) = mix(fnv(P(i), TAG_KV, l, j))
 *   entry digest    F(e) = mix(fnv(TAG_FOLD, e.words[0..d)))
 *   embedding       x_0(i) = mix(fnv(seed, TAG_EMBED, token_i, i))
 *   query           q(x) = mix(x ^ TAG_QUERY)
 *   attention out   a(i, l) = (i+1) * q(x_l(i)) + sum_{j<=i} F(entry(j, l))
 *                   (wrapping u64 arithmetic; the fold is a commutative sum)
 *   hidden update   x_{l+1}(i) = mix(fnv(TAG_HIDDEN, x_l(i), a(i, l)))
 *   next token      t = mix(x_L(last) ^ TAG_SAMPLE) mod V
 *
 * Because a(i, l) folds the digest of every stored KV entry at positions
 * j <= i, any corruption of transferred KV data changes generated tokens.
 */
#ifndef SPLITSERVE_HASH_MODEL_H_
#define SPLITSERVE_HASH_MODEL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "splitserve/common.h"
#include "splitserve/config.h"

namespace splitserve {

/*! \brief 64-bit FNV-1a over one byte. */
constexpr uint64_t kFnvBasis = 0xcbf29ce484222325ULL;
constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

inline uint64_t FnvByte(uint64_t h, uint8_t b) { return (h ^ b) * kFnvPrime; }
inline uint64_t FnvU32(uint64_t h, uint32_t w) {
  for (int i = 0; i < 4; ++i) h = FnvByte(h, static_cast<uint8_t>(w >> (8 * i)));
  return h;
}
inline uint64_t FnvU64(uint64_t h, uint64_t w) {
  for (int i = 0; i < 8; ++i) h = FnvByte(h, static_cast<uint8_t>(w >> (8 * i)));
  return h;
}

/*! \brief Finalizer with strong avalanche (splitmix64 style). */
inline uint64_t Mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

/*! \brief The toy key-value tensor for one token position at one layer. */
struct KVEntry {
  std::vector<uint64_t> words;
  bool operator==(const KVEntry&) const = default;
};

struct ForwardStepResult {
  /*! \brief new_entries[p - begin][layer] for positions p in [begin, len). */
  std::vector<std::vector<KVEntry>> new_entries;
  uint64_t last_hidden = 0;
  Token next_token = 0;
};

class HashModel {
 public:
  explicit HashModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  uint64_t InitialPrefixDigest() const;
  uint64_t ExtendPrefixDigest(uint64_t digest, Token t) const;
  /*! \brief Digest of the full token span. */
  uint64_t PrefixDigest(std::span<const Token> tokens) const;

  /*! \brief KV entry for the token prefix `tokens_prefix` (position = size-1). */
  KVEntry KvEntry(std::span<const Token> tokens_prefix, int32_t layer) const;
  /*! \brief Same, given the prefix digest; writes exactly `dim` words. */
  void KvEntryWords(uint64_t prefix_digest, int32_t layer, std::span<uint64_t> out) const;

  /*! \brief F(entry): the digest attention folds over. */
  uint64_t EntryDigest(std::span<const uint64_t> words) const;

  uint64_t Embed(Token t, int64_t pos) const;
  uint64_t Query(uint64_t hidden) const;
  /*! \brief a(i,l) with count = i+1 and fold_sum = sum of entry digests. */
  uint64_t AttentionOut(uint64_t hidden, int64_t count, uint64_t fold_sum) const;
  uint64_t NextHidden(uint64_t hidden, uint64_t attn_out) const;
  Token SampleToken(uint64_t last_hidden) const;

  /*!
   * \brief Reference prefill of positions [begin, len) given KV entries for
   *        positions < begin. kv_context[p][l] must hold the entry bytes the
   *        caller believes in; corrupted context diverges the output.
   */
  ForwardStepResult ForwardStep(std::span<const Token> tokens,
                                const std::vector<std::vector<KVEntry>>& kv_context,
                                int64_t begin) const;

  /*! \brief Reference whole-prompt generation: greedy, max_tokens outputs. */
  std::vector<Token> Generate(std::span<const Token> prompt, int32_t max_tokens) const;

 private:
  ModelConfig config_;
  uint64_t seed_state_;  // fnv(basis, hash_seed)
};

}  // namespace splitserve

#endif  // SPLITSERVE_HASH_MODEL_H_

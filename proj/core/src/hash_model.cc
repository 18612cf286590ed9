/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/hash_model.cc
 */
#include "splitserve/hash_model.h"

#include "splitserve/errors.h"

namespace splitserve {

namespace {
// Domain-separation tags (ASCII mnemonics, values are the contract).
constexpr uint64_t kTagPrefix = 0x7072656669783031ULL;
constexpr uint64_t kTagKV = 0x6b76656e74727930ULL;
constexpr uint64_t kTagFold = 0x666f6c6430303030ULL;
constexpr uint64_t kTagEmbed = 0x656d626564303030ULL;
constexpr uint64_t kTagQuery = 0x7175657279303030ULL;
constexpr uint64_t kTagHidden = 0x68696464656e3030ULL;
constexpr uint64_t kTagSample = 0x73616d706c653030ULL;
}  // namespace

HashModel::HashModel(ModelConfig config) : config_(config) {
  config_.Validate();
  seed_state_ = FnvU64(kFnvBasis, config_.hash_seed);
}

uint64_t HashModel::InitialPrefixDigest() const { return FnvU64(seed_state_, kTagPrefix); }

uint64_t HashModel::ExtendPrefixDigest(uint64_t digest, Token t) const {
  return FnvU32(digest, static_cast<uint32_t>(t));
}

uint64_t HashModel::PrefixDigest(std::span<const Token> tokens) const {
  uint64_t d = InitialPrefixDigest();
  for (Token t : tokens) d = ExtendPrefixDigest(d, t);
  return d;
}

void HashModel::KvEntryWords(uint64_t prefix_digest, int32_t layer,
                             std::span<uint64_t> out) const {
  SPLITSERVE_ICHECK(out.size() == static_cast<size_t>(config_.dim), "kv entry width mismatch");
  uint64_t base = FnvU64(FnvU64(prefix_digest, kTagKV), static_cast<uint64_t>(layer));
  for (int32_t j = 0; j < config_.dim; ++j) {
    out[j] = Mix64(FnvU64(base, static_cast<uint64_t>(j)));
  }
}

KVEntry HashModel::KvEntry(std::span<const Token> tokens_prefix, int32_t layer) const {
  SPLITSERVE_CHECK(!tokens_prefix.empty(), ErrorCode::kInvalidArgument,
                   "kv entry needs a non-empty prefix");
  KVEntry entry;
  entry.words.resize(config_.dim);
  KvEntryWords(PrefixDigest(tokens_prefix), layer, entry.words);
  return entry;
}

uint64_t HashModel::EntryDigest(std::span<const uint64_t> words) const {
  uint64_t h = FnvU64(kFnvBasis, kTagFold);
  for (uint64_t w : words) h = FnvU64(h, w);
  return Mix64(h);
}

uint64_t HashModel::Embed(Token t, int64_t pos) const {
  uint64_t h = FnvU64(seed_state_, kTagEmbed);
  h = FnvU32(h, static_cast<uint32_t>(t));
  h = FnvU64(h, static_cast<uint64_t>(pos));
  return Mix64(h);
}

uint64_t HashModel::Query(uint64_t hidden) const { return Mix64(hidden ^ kTagQuery); }

uint64_t HashModel::AttentionOut(uint64_t hidden, int64_t count, uint64_t fold_sum) const {
  return static_cast<uint64_t>(count) * Query(hidden) + fold_sum;
}

uint64_t HashModel::NextHidden(uint64_t hidden, uint64_t attn_out) const {
  uint64_t h = FnvU64(kFnvBasis, kTagHidden);
  h = FnvU64(h, hidden);
  h = FnvU64(h, attn_out);
  return Mix64(h);
}

Token HashModel::SampleToken(uint64_t last_hidden) const {
  return static_cast<Token>(Mix64(last_hidden ^ kTagSample) %
                            static_cast<uint64_t>(config_.vocab));
}

ForwardStepResult HashModel::ForwardStep(std::span<const Token> tokens,
                                         const std::vector<std::vector<KVEntry>>& kv_context,
                                         int64_t begin) const {
  const int64_t n = static_cast<int64_t>(tokens.size());
  const int32_t L = config_.layers;
  SPLITSERVE_CHECK(begin >= 0 && begin < n, ErrorCode::kInvalidArgument, "begin out of range");
  SPLITSERVE_CHECK(static_cast<int64_t>(kv_context.size()) >= begin,
                   ErrorCode::kInvalidArgument, "kv context shorter than begin");

  ForwardStepResult result;
  result.new_entries.resize(n - begin);

  // Per-layer running fold over entry digests, seeded with the context.
  std::vector<uint64_t> fold(L, 0);
  for (int64_t p = 0; p < begin; ++p) {
    for (int32_t l = 0; l < L; ++l) fold[l] += EntryDigest(kv_context[p][l].words);
  }

  uint64_t digest = InitialPrefixDigest();
  for (int64_t p = 0; p < begin; ++p) digest = ExtendPrefixDigest(digest, tokens[p]);

  uint64_t last_hidden = 0;
  for (int64_t p = begin; p < n; ++p) {
    digest = ExtendPrefixDigest(digest, tokens[p]);
    auto& entries = result.new_entries[p - begin];
    entries.resize(L);
    for (int32_t l = 0; l < L; ++l) {
      entries[l].words.resize(config_.dim);
      KvEntryWords(digest, l, entries[l].words);
      fold[l] += EntryDigest(entries[l].words);
    }
    uint64_t x = Embed(tokens[p], p);
    for (int32_t l = 0; l < L; ++l) {
      x = NextHidden(x, AttentionOut(x, p + 1, fold[l]));
    }
    last_hidden = x;
  }
  result.last_hidden = last_hidden;
  result.next_token = SampleToken(last_hidden);
  return result;
}

std::vector<Token> HashModel::Generate(std::span<const Token> prompt,
                                       int32_t max_tokens) const {
  SPLITSERVE_CHECK(!prompt.empty(), ErrorCode::kInvalidArgument, "empty prompt");
  SPLITSERVE_CHECK(max_tokens >= 1, ErrorCode::kInvalidArgument, "max_tokens must be positive");
  const int32_t L = config_.layers;

  TokenList tokens(prompt.begin(), prompt.end());
  std::vector<uint64_t> fold(L, 0);
  uint64_t digest = InitialPrefixDigest();

  std::vector<Token> out;
  out.reserve(max_tokens);

  uint64_t last_hidden = 0;
  size_t processed = 0;
  while (true) {
    // Fold in KV of any not-yet-processed positions and run their hidden stack.
    for (; processed < tokens.size(); ++processed) {
      digest = ExtendPrefixDigest(digest, tokens[processed]);
      for (int32_t l = 0; l < L; ++l) {
        std::vector<uint64_t> words(config_.dim);
        KvEntryWords(digest, l, words);
        fold[l] += EntryDigest(words);
      }
      uint64_t x = Embed(tokens[processed], static_cast<int64_t>(processed));
      for (int32_t l = 0; l < L; ++l) {
        x = NextHidden(x, AttentionOut(x, static_cast<int64_t>(processed) + 1, fold[l]));
      }
      last_hidden = x;
    }
    Token next = SampleToken(last_hidden);
    out.push_back(next);
    if (static_cast<int32_t>(out.size()) >= max_tokens) break;
    tokens.push_back(next);
  }
  return out;
}

}  // namespace splitserve

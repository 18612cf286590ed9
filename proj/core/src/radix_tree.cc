/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/radix_tree.cc
 */
#include "splitserve/radix_tree.h"

#include <algorithm>

#include "splitserve/errors.h"

namespace splitserve {

struct RadixTree::Node {
  TokenList edge;
  std::map<Token, std::unique_ptr<Node>> children;
  SeqId ref = -1;    // most recent sequence whose tokens cover this span
  uint64_t lru = 0;
  bool pinned = false;
};

RadixTree::RadixTree() : root_(std::make_unique<Node>()) {}
RadixTree::~RadixTree() = default;

void RadixTree::TouchSeq(SeqId seq) {
  if (seq >= 0) touch_[seq] = ++clock_;
}

RadixTree::MatchResult RadixTree::MatchPrefix(std::span<const Token> tokens) {
  MatchResult result;
  Node* node = root_.get();
  size_t pos = 0;
  ++clock_;
  while (pos < tokens.size()) {
    auto it = node->children.find(tokens[pos]);
    if (it == node->children.end()) break;
    Node* child = it->second.get();
    size_t common = 0;
    while (common < child->edge.size() && pos + common < tokens.size() &&
           child->edge[common] == tokens[pos + common]) {
      ++common;
    }
    if (common > 0) {
      child->lru = clock_;
      result.match_len = static_cast<int64_t>(pos + common);
      result.seq = child->ref;
    }
    if (common < child->edge.size()) break;  // diverged or query exhausted mid-edge
    pos += common;
    node = child;
  }
  TouchSeq(result.seq);
  return result;
}

void RadixTree::Insert(std::span<const Token> tokens, SeqId seq) {
  Node* node = root_.get();
  size_t pos = 0;
  ++clock_;
  while (pos < tokens.size()) {
    auto it = node->children.find(tokens[pos]);
    if (it == node->children.end()) {
      auto fresh = std::make_unique<Node>();
      fresh->edge.assign(tokens.begin() + pos, tokens.end());
      fresh->ref = seq;
      fresh->lru = clock_;
      node->children[tokens[pos]] = std::move(fresh);
      TouchSeq(seq);
      return;
    }
    Node* child = it->second.get();
    size_t common = 0;
    while (common < child->edge.size() && pos + common < tokens.size() &&
           child->edge[common] == tokens[pos + common]) {
      ++common;
    }
    if (common < child->edge.size()) {
      // Split the edge at the divergence (or query-exhaustion) point.
      auto tail = std::make_unique<Node>();
      tail->edge.assign(child->edge.begin() + common, child->edge.end());
      tail->ref = child->ref;
      tail->lru = child->lru;
      tail->pinned = child->pinned;
      tail->children = std::move(child->children);
      child->edge.resize(common);
      child->children.clear();
      child->children[tail->edge[0]] = std::move(tail);
    }
    child->ref = seq;
    child->lru = clock_;
    pos += common;
    node = child;
  }
  TouchSeq(seq);
}

void RadixTree::Remove(SeqId seq) {
  struct Impl {
    SeqId seq;
    // Returns true if `node` survives.
    bool Visit(Node* node) {
      for (auto it = node->children.begin(); it != node->children.end();) {
        if (Visit(it->second.get())) {
          ++it;
        } else {
          it = node->children.erase(it);
        }
      }
      if (node->ref == seq) {
        if (node->children.empty()) return false;
        node->ref = node->children.begin()->second->ref;
      }
      return true;
    }
  };
  Impl impl{seq};
  for (auto it = root_->children.begin(); it != root_->children.end();) {
    if (impl.Visit(it->second.get())) {
      ++it;
    } else {
      it = root_->children.erase(it);
    }
  }
  touch_.erase(seq);
}

void RadixTree::Pin(std::span<const Token> prefix, bool flag) {
  Node* node = root_.get();
  size_t pos = 0;
  while (pos < prefix.size()) {
    auto it = node->children.find(prefix[pos]);
    if (it == node->children.end()) return;
    Node* child = it->second.get();
    size_t common = 0;
    while (common < child->edge.size() && pos + common < prefix.size() &&
           child->edge[common] == prefix[pos + common]) {
      ++common;
    }
    if (common > 0) child->pinned = flag;
    if (common < child->edge.size()) return;
    pos += common;
    node = child;
  }
}

bool RadixTree::HasPinnedNode(SeqId seq) const {
  struct Impl {
    SeqId seq;
    bool Visit(const Node* node) const {
      if (node->ref == seq && node->pinned) return true;
      for (const auto& [tok, child] : node->children) {
        if (Visit(child.get())) return true;
      }
      return false;
    }
  };
  return Impl{seq}.Visit(root_.get());
}

bool RadixTree::Contains(SeqId seq) const { return touch_.count(seq) > 0; }

uint64_t RadixTree::LastTouch(SeqId seq) const {
  auto it = touch_.find(seq);
  return it == touch_.end() ? 0 : it->second;
}

std::vector<SeqId> RadixTree::SequencesByLru() const {
  std::vector<std::pair<uint64_t, SeqId>> order;
  order.reserve(touch_.size());
  for (const auto& [seq, stamp] : touch_) order.emplace_back(stamp, seq);
  std::sort(order.begin(), order.end());
  std::vector<SeqId> out;
  out.reserve(order.size());
  for (const auto& [stamp, seq] : order) out.push_back(seq);
  return out;
}

size_t RadixTree::NodeCount() const {
  struct Impl {
    size_t Visit(const Node* node) const {
      size_t n = 1;
      for (const auto& [tok, child] : node->children) n += Visit(child.get());
      return n;
    }
  };
  return Impl{}.Visit(root_.get()) - 1;  // exclude root
}

}  // namespace splitserve

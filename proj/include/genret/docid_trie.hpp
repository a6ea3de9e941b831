#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "genret/corpus.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

class Vocabulary;

// Token-level prefix tree over the encoded DocIds of a corpus. Immutable
// after build and shared freely between decoding sessions.
class DocIdTrie {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kRoot = 0;
  static constexpr std::int32_t kNoDoc = -1;

  // Throws TrieBuildError if a DocId encodes to nothing, contains an
  // unknown or special token, or shares its token path with another DocId.
  static DocIdTrie build(const Corpus& corpus, const Vocabulary& vocab);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t doc_count() const { return doc_ids_.size(); }
  bool empty() const { return doc_ids_.empty(); }

  std::optional<NodeId> child(NodeId node, TokenId token) const;
  std::optional<NodeId> walk(std::span<const TokenId> path) const;
  // Children sorted by token id.
  std::span<const std::pair<TokenId, NodeId>> children(NodeId node) const { return nodes_[node].children; }
  bool is_terminal(NodeId node) const { return nodes_[node].doc != kNoDoc; }
  // Index into doc_ids() of the DocId ending at `node`, or kNoDoc.
  std::int32_t terminal_doc(NodeId node) const { return nodes_[node].doc; }
  std::uint32_t subtree_count(NodeId node) const { return nodes_[node].subtree_count; }

  const std::vector<DocId>& doc_ids() const { return doc_ids_; }
  std::optional<std::size_t> doc_index(std::string_view doc_id) const;
  std::span<const TokenId> doc_tokens(std::size_t doc) const { return doc_tokens_[doc]; }

  // Preorder dump, one "depth token_id terminal" line per node (the root
  // is depth 0 with token id 0).
  void save_snapshot(std::ostream& out) const;
  // Rebuilds the structure from a snapshot and binds terminals to the
  // corpus DocIds. Throws ParseError / TrieBuildError on inconsistency.
  static DocIdTrie load_snapshot(std::istream& in, const Corpus& corpus, const Vocabulary& vocab);

  bool same_structure(const DocIdTrie& other) const;

 private:
  struct Node {
    std::vector<std::pair<TokenId, NodeId>> children;
    std::int32_t doc = kNoDoc;
    std::uint32_t subtree_count = 0;
  };

  NodeId add_child(NodeId parent, TokenId token);
  void finalize_counts();

  std::vector<Node> nodes_;
  std::vector<DocId> doc_ids_;
  std::vector<std::vector<TokenId>> doc_tokens_;
  std::unordered_map<DocId, std::size_t> doc_index_;
};

// DocIds logically removed from the trie for one decoding session. Holds a
// reference to the trie, which must outlive it. Not thread-safe.
class ExclusionSet {
 public:
  explicit ExclusionSet(const DocIdTrie& trie) : trie_(&trie) {}

  // Throws NotFound for a DocId that is not in the trie. Idempotent.
  void exclude(std::string_view doc_id);
  bool contains(std::string_view doc_id) const;
  std::size_t size() const { return excluded_.size(); }

  bool doc_excluded(std::size_t doc) const { return excluded_.count(doc) > 0; }
  // True when at least one non-excluded DocId ends at or below `node`.
  bool live(DocIdTrie::NodeId node) const;
  bool terminal_live(DocIdTrie::NodeId node) const;

 private:
  const DocIdTrie* trie_;
  std::unordered_set<std::size_t> excluded_;
  // Excluded terminals at or below each touched node.
  std::unordered_map<DocIdTrie::NodeId, std::uint32_t> excluded_below_;
};

struct Continuations {
  std::vector<TokenId> tokens;  // ascending
  bool close_permitted = false;
};

// Tokens t such that prefix+t still leads to a non-excluded DocId, and
// whether the prefix itself completes one. Throws InvalidPrefix when the
// prefix is not a trie path.
Continuations allowed_continuations(const DocIdTrie& trie, std::span<const TokenId> prefix,
                                    const ExclusionSet& excl);

}  // namespace genret

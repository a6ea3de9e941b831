#include "genret/docid_trie.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "genret/errors.hpp"
#include "genret/vocabulary.hpp"

namespace genret {

std::optional<DocIdTrie::NodeId> DocIdTrie::child(NodeId node, TokenId token) const {
  const auto& kids = nodes_[node].children;
  auto it = std::lower_bound(kids.begin(), kids.end(), token,
                             [](const std::pair<TokenId, NodeId>& c, TokenId t) { return c.first < t; });
  if (it == kids.end() || it->first != token) return std::nullopt;
  return it->second;
}

std::optional<DocIdTrie::NodeId> DocIdTrie::walk(std::span<const TokenId> path) const {
  NodeId node = kRoot;
  for (auto t : path) {
    auto next = child(node, t);
    if (!next) return std::nullopt;
    node = *next;
  }
  return node;
}

DocIdTrie::NodeId DocIdTrie::add_child(NodeId parent, TokenId token) {
  if (auto existing = child(parent, token)) return *existing;
  auto id = static_cast<NodeId>(nodes_.size());
  nodes_.emplace_back();
  auto& kids = nodes_[parent].children;
  auto it = std::lower_bound(kids.begin(), kids.end(), token,
                             [](const std::pair<TokenId, NodeId>& c, TokenId t) { return c.first < t; });
  kids.insert(it, {token, id});
  return id;
}

void DocIdTrie::finalize_counts() {
  for (auto& n : nodes_) n.subtree_count = 0;
  // Children always have larger ids than their parent.
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    auto& n = nodes_[i];
    n.subtree_count += n.doc != kNoDoc ? 1 : 0;
    for (const auto& [tok, c] : n.children) n.subtree_count += nodes_[c].subtree_count;
  }
}

DocIdTrie DocIdTrie::build(const Corpus& corpus, const Vocabulary& vocab) {
  DocIdTrie trie;
  trie.nodes_.emplace_back();
  for (const auto& id : corpus.doc_ids()) {
    auto tokens = vocab.encode(id);
    if (tokens.empty()) throw TrieBuildError("DocId '" + id + "' encodes to an empty sequence");
    for (auto t : tokens) {
      if (is_special(t)) {
        throw TrieBuildError("DocId '" + id + "' contains " + (t == kUnk ? "an unknown" : "a special") + " token");
      }
    }
    NodeId node = kRoot;
    for (auto t : tokens) node = trie.add_child(node, t);
    if (trie.nodes_[node].doc != kNoDoc) {
      throw TrieBuildError("DocIds '" + trie.doc_ids_[trie.nodes_[node].doc] + "' and '" + id +
                           "' encode to the same token sequence");
    }
    trie.nodes_[node].doc = static_cast<std::int32_t>(trie.doc_ids_.size());
    trie.doc_index_.emplace(id, trie.doc_ids_.size());
    trie.doc_ids_.push_back(id);
    trie.doc_tokens_.push_back(std::move(tokens));
  }
  trie.finalize_counts();
  return trie;
}

std::optional<std::size_t> DocIdTrie::doc_index(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) return std::nullopt;
  return it->second;
}

void DocIdTrie::save_snapshot(std::ostream& out) const {
  // Explicit stack keeps deep DocIds from exhausting the call stack.
  std::vector<std::pair<NodeId, std::size_t>> stack{{kRoot, 0}};
  std::vector<TokenId> token_of(nodes_.size(), 0);
  while (!stack.empty()) {
    auto [node, depth] = stack.back();
    stack.pop_back();
    out << depth << ' ' << token_of[node] << ' ' << (is_terminal(node) ? 1 : 0) << '\n';
    const auto& kids = nodes_[node].children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
      token_of[it->second] = it->first;
      stack.emplace_back(it->second, depth + 1);
    }
  }
}

DocIdTrie DocIdTrie::load_snapshot(std::istream& in, const Corpus& corpus, const Vocabulary& vocab) {
  DocIdTrie trie;
  std::vector<NodeId> path;  // node at each depth
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t depth = 0;
    TokenId token = 0;
    int terminal = 0;
    if (!(fields >> depth >> token >> terminal) || (terminal != 0 && terminal != 1)) {
      throw ParseError(line_no, "expected 'depth token_id terminal'");
    }
    if (trie.nodes_.empty()) {
      if (depth != 0) throw ParseError(line_no, "snapshot must start with the root");
      trie.nodes_.emplace_back();
      path.assign(1, kRoot);
    } else {
      if (depth == 0 || depth > path.size()) throw ParseError(line_no, "depth out of sequence");
      if (token >= vocab.size() || is_special(token)) throw ParseError(line_no, "invalid token id");
      path.resize(depth);
      auto before = trie.nodes_.size();
      NodeId node = trie.add_child(path.back(), token);
      if (trie.nodes_.size() == before) throw ParseError(line_no, "duplicate child");
      path.push_back(node);
    }
    if (terminal) trie.nodes_[path.back()].doc = -2;  // bound below
  }
  if (trie.nodes_.empty()) throw ParseError(line_no, "empty snapshot");

  for (const auto& id : corpus.doc_ids()) {
    auto tokens = vocab.encode(id);
    auto node = trie.walk(tokens);
    if (!node || trie.nodes_[*node].doc != -2) {
      throw TrieBuildError("snapshot has no terminal for DocId '" + id + "'");
    }
    trie.nodes_[*node].doc = static_cast<std::int32_t>(trie.doc_ids_.size());
    trie.doc_index_.emplace(id, trie.doc_ids_.size());
    trie.doc_ids_.push_back(id);
    trie.doc_tokens_.push_back(std::move(tokens));
  }
  for (const auto& n : trie.nodes_) {
    if (n.doc == -2) throw TrieBuildError("snapshot terminal does not match any corpus DocId");
  }
  trie.finalize_counts();
  return trie;
}

bool DocIdTrie::same_structure(const DocIdTrie& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  std::vector<std::pair<NodeId, NodeId>> stack{{kRoot, kRoot}};
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    const auto& na = nodes_[a];
    const auto& nb = other.nodes_[b];
    if (is_terminal(a) != other.is_terminal(b) || na.subtree_count != nb.subtree_count ||
        na.children.size() != nb.children.size()) {
      return false;
    }
    if (is_terminal(a) && doc_ids_[na.doc] != other.doc_ids_[nb.doc]) return false;
    for (std::size_t i = 0; i < na.children.size(); ++i) {
      if (na.children[i].first != nb.children[i].first) return false;
      stack.emplace_back(na.children[i].second, nb.children[i].second);
    }
  }
  return true;
}

void ExclusionSet::exclude(std::string_view doc_id) {
  auto doc = trie_->doc_index(doc_id);
  if (!doc) throw NotFound("cannot exclude unknown DocId '" + std::string(doc_id) + "'");
  if (!excluded_.insert(*doc).second) return;
  DocIdTrie::NodeId node = DocIdTrie::kRoot;
  ++excluded_below_[node];
  for (auto t : trie_->doc_tokens(*doc)) {
    node = *trie_->child(node, t);
    ++excluded_below_[node];
  }
}

bool ExclusionSet::contains(std::string_view doc_id) const {
  auto doc = trie_->doc_index(doc_id);
  return doc && excluded_.count(*doc) > 0;
}

bool ExclusionSet::live(DocIdTrie::NodeId node) const {
  auto it = excluded_below_.find(node);
  std::uint32_t gone = it == excluded_below_.end() ? 0 : it->second;
  return trie_->subtree_count(node) > gone;
}

bool ExclusionSet::terminal_live(DocIdTrie::NodeId node) const {
  auto doc = trie_->terminal_doc(node);
  return doc != DocIdTrie::kNoDoc && excluded_.count(static_cast<std::size_t>(doc)) == 0;
}

Continuations allowed_continuations(const DocIdTrie& trie, std::span<const TokenId> prefix,
                                    const ExclusionSet& excl) {
  auto node = trie.walk(prefix);
  if (!node) throw InvalidPrefix("prefix of length " + std::to_string(prefix.size()) + " is not a trie path");
  Continuations out;
  for (const auto& [tok, c] : trie.children(*node)) {
    if (excl.live(c)) out.tokens.push_back(tok);
  }
  out.close_permitted = excl.terminal_live(*node);
  return out;
}

}  // namespace genret

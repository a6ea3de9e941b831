#include "genret/constraints.hpp"

#include <algorithm>
#include <string>

#include "genret/errors.hpp"

namespace genret {

ConstraintState scan_state(std::span<const TokenId> generated) {
  for (std::size_t i = generated.size(); i-- > 0;) {
    if (generated[i] == kDocIdClose) return {};
    if (generated[i] == kDocIdOpen) {
      ConstraintState s;
      s.mode = ConstraintState::Mode::kInsideDocId;
      s.inner_prefix.assign(generated.begin() + static_cast<std::ptrdiff_t>(i) + 1, generated.end());
      return s;
    }
  }
  return {};
}

ConstraintState step_state(ConstraintState prev, TokenId emitted) {
  if (!prev.inside()) {
    if (emitted == kDocIdClose) throw MalformedSequence("</docid> emitted outside a DocId span");
    if (emitted == kDocIdOpen) {
      prev.mode = ConstraintState::Mode::kInsideDocId;
      prev.inner_prefix.clear();
    }
    return prev;
  }
  if (emitted == kDocIdClose) return {};
  if (emitted == kDocIdOpen) throw MalformedSequence("<docid> emitted inside a DocId span");
  if (is_special(emitted)) {
    throw MalformedSequence("special token " + std::to_string(emitted) + " emitted inside a DocId span");
  }
  prev.inner_prefix.push_back(emitted);
  return prev;
}

std::vector<TokenId> allowed_mask(const ConstraintState& state, const DocIdTrie& trie, const ExclusionSet& excl,
                                  DecodePhase phase, std::size_t vocab_size) {
  if (state.inside()) {
    auto cont = allowed_continuations(trie, state.inner_prefix, excl);
    if (cont.tokens.empty() && !cont.close_permitted) {
      throw DeadEnd("no live DocId continues the current span (" + std::to_string(state.inner_prefix.size()) +
                    " tokens in)");
    }
    if (cont.close_permitted) {
      // </docid> has id 1, below every trie token.
      cont.tokens.insert(cont.tokens.begin(), kDocIdClose);
    }
    return std::move(cont.tokens);
  }
  if (phase == DecodePhase::kDocIdList) {
    std::vector<TokenId> mask;
    if (excl.live(DocIdTrie::kRoot)) mask.push_back(kDocIdOpen);
    mask.push_back(kEos);
    return mask;
  }
  std::vector<TokenId> mask;
  mask.reserve(vocab_size);
  bool open_ok = excl.live(DocIdTrie::kRoot);
  for (TokenId t = 0; t < vocab_size; ++t) {
    if (t == kDocIdClose || (t == kDocIdOpen && !open_ok)) continue;
    mask.push_back(t);
  }
  return mask;
}

}  // namespace genret

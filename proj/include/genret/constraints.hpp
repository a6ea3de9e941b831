#pragma once

#include <span>
#include <vector>

#include "genret/docid_trie.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

enum class DecodePhase {
  kDocIdList,  // outside spans only <docid> or <eos> may follow
  kFreeText,   // anything but an unmatched </docid>
};

// Whether generation is inside a DocId span, and the span's tokens so far.
struct ConstraintState {
  enum class Mode { kUnconstrained, kInsideDocId };
  Mode mode = Mode::kUnconstrained;
  std::vector<TokenId> inner_prefix;

  bool inside() const { return mode == Mode::kInsideDocId; }
  bool operator==(const ConstraintState&) const = default;
};

// Literal backward scan over the whole history: the nearest </docid> ends
// the scan unconstrained, the nearest <docid> switches constraints on for
// the tokens after it. O(history).
ConstraintState scan_state(std::span<const TokenId> generated);

// Incremental form of scan_state, O(1) amortized per token. Throws
// MalformedSequence for </docid> outside a span, and for <docid> or any
// other special inside one.
ConstraintState step_state(ConstraintState prev, TokenId emitted);

// Allowed next tokens, ascending. Inside a span: the trie continuations of
// inner_prefix, plus </docid> when it completes a live DocId; throws DeadEnd
// if neither exists. Outside a span in the DocId-list phase: <docid> (only
// while some DocId is still live) and <eos>. Outside a span in the
// free-text phase: every id except </docid> (and <docid> once nothing is
// live).
std::vector<TokenId> allowed_mask(const ConstraintState& state, const DocIdTrie& trie, const ExclusionSet& excl,
                                  DecodePhase phase, std::size_t vocab_size);

}  // namespace genret

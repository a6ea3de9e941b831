#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace genret {

using TokenId = std::uint32_t;

// Reserved ids. The order is part of the vocabulary file format.
inline constexpr TokenId kDocIdOpen = 0;
inline constexpr TokenId kDocIdClose = 1;
inline constexpr TokenId kRefOpen = 2;
inline constexpr TokenId kRefClose = 3;
inline constexpr TokenId kAnswerOpen = 4;
inline constexpr TokenId kEos = 5;
inline constexpr TokenId kUnk = 6;
inline constexpr TokenId kNumSpecials = 7;

inline constexpr bool is_special(TokenId id) { return id < kNumSpecials; }

// Surface forms of the specials, indexed by id.
inline constexpr std::string_view kSpecialSurfaces[kNumSpecials] = {
    "<docid>", "</docid>", "<ref>", "</ref>", "<answer>", "<eos>", "<unk>"};

// Specials that encode() recognizes inside running text. <eos> and <unk> are
// output-only.
inline constexpr TokenId kEncodableSpecials[] = {kDocIdOpen, kDocIdClose, kRefOpen, kRefClose,
                                                 kAnswerOpen};

struct Piece {
  std::string text;
  bool special = false;  // one of the encodable special surfaces
  TokenId special_id = 0;
};

// Splits text into lowercased word tokens (maximal runs of ASCII
// alphanumerics or non-ASCII bytes) and single-character punctuation
// tokens. Encodable special surfaces are kept whole.
std::vector<Piece> tokenize(std::string_view text);

// Word/punctuation tokens only (special surfaces dropped).
std::vector<std::string> word_tokens(std::string_view text);

// Lowercased tokens joined by single spaces; the image of decode(encode(.)).
std::string normalize_tokens(std::string_view text);

// The first `limit` tokens of text, normalized.
std::string truncate_tokens(std::string_view text, std::size_t limit);

// Collapses internal whitespace runs to one space and strips the ends.
std::string collapse_whitespace(std::string_view text);

}  // namespace genret

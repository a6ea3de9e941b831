#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "genret/tokenizer.hpp"

namespace genret {

class Corpus;

// Word-level vocabulary. Ids 0-6 are the specials; the remaining tokens
// follow in lexicographic order. Immutable once built.
class Vocabulary {
 public:
  Vocabulary();

  // Specials are prepended; `words` is sorted and deduplicated.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return id_to_token_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  // Throws InvalidToken on an out-of-range id.
  const std::string& token(TokenId id) const;

  std::vector<TokenId> encode(std::string_view text) const;
  // Surface forms joined with single spaces. Throws InvalidToken.
  std::string decode(std::span<const TokenId> tokens) const;

  // One token per line; the line number is the id.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// Specials plus every token in corpus titles, sections, bodies, and the
// extra texts.
Vocabulary build_vocabulary(const Corpus& corpus, std::span<const std::string> extra_texts = {});

}  // namespace genret

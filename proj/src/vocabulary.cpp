#include "genret/vocabulary.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "genret/corpus.hpp"
#include "genret/errors.hpp"

namespace genret {

Vocabulary::Vocabulary() {
  for (TokenId id = 0; id < kNumSpecials; ++id) {
    id_to_token_.emplace_back(kSpecialSurfaces[id]);
    token_to_id_.emplace(id_to_token_.back(), id);
  }
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  Vocabulary v;
  for (auto& w : words) {
    if (v.token_to_id_.count(w)) continue;
    auto id = static_cast<TokenId>(v.id_to_token_.size());
    v.token_to_id_.emplace(w, id);
    v.id_to_token_.push_back(std::move(w));
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= id_to_token_.size()) {
    throw InvalidToken("token id " + std::to_string(id) + " out of range (vocabulary size " +
                       std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[id];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& piece : tokenize(text)) {
    if (piece.special) {
      out.push_back(piece.special_id);
      continue;
    }
    auto it = token_to_id_.find(piece.text);
    out.push_back(it == token_to_id_.end() ? kUnk : it->second);
  }
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (auto id : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  v.id_to_token_.clear();
  v.token_to_id_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto id = static_cast<TokenId>(v.id_to_token_.size());
    if (id < kNumSpecials && line != kSpecialSurfaces[id]) {
      throw ParseError(line_no, "expected special token " + std::string(kSpecialSurfaces[id]));
    }
    if (line.empty()) throw ParseError(line_no, "empty token");
    if (!v.token_to_id_.emplace(line, id).second) throw ParseError(line_no, "duplicate token '" + line + "'");
    v.id_to_token_.push_back(line);
  }
  if (v.id_to_token_.size() < kNumSpecials) throw ParseError(line_no, "vocabulary file is missing special tokens");
  return v;
}

Vocabulary build_vocabulary(const Corpus& corpus, std::span<const std::string> extra_texts) {
  std::set<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& w : word_tokens(text)) words.insert(std::move(w));
  };
  corpus.for_each([&](const Document& d) {
    add(d.title);
    add(d.section);
    add(d.body);
    add(d.doc_id);  // the '#' separator
  });
  for (const auto& t : extra_texts) add(t);
  return Vocabulary::from_words({words.begin(), words.end()});
}

}  // namespace genret

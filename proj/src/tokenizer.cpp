#include "genret/tokenizer.hpp"

namespace genret {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c); }

bool matches_at(std::string_view text, std::size_t pos, std::string_view surface) {
  if (pos + surface.size() > text.size()) return false;
  for (std::size_t i = 0; i < surface.size(); ++i) {
    if (lower(static_cast<unsigned char>(text[pos + i])) != surface[i]) return false;
  }
  return true;
}

}  // namespace

std::vector<Piece> tokenize(std::string_view text) {
  std::vector<Piece> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '<') {
      bool found = false;
      for (TokenId id : kEncodableSpecials) {
        auto surface = kSpecialSurfaces[id];
        if (matches_at(text, i, surface)) {
          pieces.push_back({std::string(surface), true, id});
          i += surface.size();
          found = true;
          break;
        }
      }
      if (found) continue;
    }
    if (is_word_byte(c)) {
      std::string word;
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
        word.push_back(lower(static_cast<unsigned char>(text[i])));
        ++i;
      }
      pieces.push_back({std::move(word), false, 0});
      continue;
    }
    pieces.push_back({std::string(1, static_cast<char>(c)), false, 0});
    ++i;
  }
  return pieces;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& p : tokenize(text)) {
    if (!p.special) out.push_back(std::move(p.text));
  }
  return out;
}

std::string normalize_tokens(std::string_view text) {
  std::string out;
  for (const auto& p : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += p.text;
  }
  return out;
}

std::string truncate_tokens(std::string_view text, std::size_t limit) {
  std::string out;
  std::size_t n = 0;
  for (const auto& p : tokenize(text)) {
    if (n == limit) break;
    if (!out.empty()) out.push_back(' ');
    out += p.text;
    ++n;
  }
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (is_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

}  // namespace genret

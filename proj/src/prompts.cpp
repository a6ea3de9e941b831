#include "genret/prompts.hpp"

#include "genret/errors.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

std::string with_prefix(std::string_view prefix, std::string_view text) {
  std::string out(prefix);
  out.push_back(' ');
  out += text;
  return out;
}

std::string render_docid_list(std::span<const DocId> docids) {
  std::string out;
  for (const auto& id : docids) {
    if (!out.empty()) out.push_back(' ');
    out += kSpecialSurfaces[kDocIdOpen];
    out.push_back(' ');
    out += id;
    out.push_back(' ');
    out += kSpecialSurfaces[kDocIdClose];
  }
  return out;
}

std::vector<DocId> parse_docid_list(std::string_view text) {
  const auto open = kSpecialSurfaces[kDocIdOpen];
  const auto close = kSpecialSurfaces[kDocIdClose];
  std::vector<DocId> out;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  skip_space();
  while (pos < text.size()) {
    if (text.substr(pos, open.size()) != open) {
      throw ParseError(1, "expected " + std::string(open) + " at offset " + std::to_string(pos));
    }
    pos += open.size();
    auto end = text.find(close, pos);
    if (end == std::string_view::npos) throw ParseError(1, "unterminated DocId span");
    auto inner = collapse_whitespace(text.substr(pos, end - pos));
    if (inner.empty()) throw ParseError(1, "empty DocId span");
    if (inner.find(open) != std::string::npos) throw ParseError(1, "nested DocId span");
    out.push_back(std::move(inner));
    pos = end + close.size();
    skip_space();
  }
  return out;
}

std::string render_document(const Document& doc, std::size_t budget) {
  auto header = normalize_tokens(doc.doc_id);
  auto header_len = tokenize(doc.doc_id).size();
  if (header_len >= budget) return header;
  // Special surfaces inside a body are dropped so injected documents never
  // carry structural tokens.
  auto words = word_tokens(doc.body);
  std::string out = header;
  for (std::size_t i = 0; i < words.size() && i < budget - header_len; ++i) {
    out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::string render_rag_input(std::string_view query, std::span<const Document> docs, std::size_t budget) {
  std::string out = with_prefix(kRagPrefix, query);
  std::vector<DocId> ids;
  for (const auto& d : docs) ids.push_back(d.doc_id);
  if (!ids.empty()) out += " " + render_docid_list(ids);
  for (const auto& d : docs) out += " " + render_document(d, budget);
  return out;
}

std::string render_reference(std::string_view reference) {
  std::string out(kSpecialSurfaces[kRefOpen]);
  if (!reference.empty()) {
    out.push_back(' ');
    out += reference;
  }
  out.push_back(' ');
  out += kSpecialSurfaces[kRefClose];
  return out;
}

std::string render_answer(std::string_view answer) {
  std::string out(kSpecialSurfaces[kAnswerOpen]);
  if (!answer.empty()) {
    out.push_back(' ');
    out += answer;
  }
  return out;
}

}  // namespace genret

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genret/corpus.hpp"

namespace genret {

// Task prefixes. Retrieval-shaped auxiliary tasks get their own prefixes so
// a scorer can tell the sources apart.
inline constexpr std::string_view kRetrievePrefix = "retrieve:";
inline constexpr std::string_view kAnswerPrefix = "answer:";
inline constexpr std::string_view kRagPrefix = "rag:";
inline constexpr std::string_view kQuery2DocIdPrefix = "query2docid:";
inline constexpr std::string_view kSummary2DocIdPrefix = "summary2docid:";
inline constexpr std::string_view kDocId2SummaryPrefix = "docid2summary:";
inline constexpr std::string_view kDocId2RelatedPrefix = "docid2related:";

inline constexpr std::size_t kDefaultDocumentBudget = 256;

std::string with_prefix(std::string_view prefix, std::string_view text);

// "<docid> a # x </docid> <docid> b # y </docid>"
std::string render_docid_list(std::span<const DocId> docids);

// Inverse of render_docid_list. Throws ParseError on anything that is not
// a sequence of non-empty, well-nested spans.
std::vector<DocId> parse_docid_list(std::string_view text);

// DocId header followed by the body, cut so that the rendering is at most
// `budget` tokens (the header is always kept whole).
std::string render_document(const Document& doc, std::size_t budget = kDefaultDocumentBudget);

// Retrieval-augmented prompt: the rag prefix and query, the DocId list of
// the documents, then each rendered document.
std::string render_rag_input(std::string_view query, std::span<const Document> docs,
                             std::size_t budget = kDefaultDocumentBudget);

std::string render_reference(std::string_view reference);  // "<ref> ... </ref>"
std::string render_answer(std::string_view answer);        // "<answer> ..."

}  // namespace genret

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "genret/corpus.hpp"

namespace genret {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::uint32_t doc;  // ingestion ordinal
  std::uint32_t tf;
};

// Lowercased word tokens with punctuation-only tokens removed.
std::vector<std::string> index_terms(std::string_view text);

// Inverted index over title, section and body terms of every document.
//   score(q, d) = sum over query term instances t of
//                 idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))
//   idf(t)      = ln((N - n_t + 0.5) / (n_t + 0.5) + 1)
class Bm25Index {
 public:
  static Bm25Index build(const Corpus& corpus, const Bm25Params& params = {});

  std::size_t doc_count() const { return doc_ids_.size(); }
  double average_length() const { return avg_length_; }
  std::uint32_t doc_length(std::size_t doc) const { return lengths_[doc]; }
  const DocId& doc_id(std::size_t doc) const { return doc_ids_[doc]; }
  std::optional<std::size_t> doc_index(std::string_view doc_id) const;
  const Bm25Params& params() const { return params_; }

  // Sorted by document ordinal; empty for unknown terms.
  std::span<const Posting> postings(std::string_view term) const;
  double idf(std::string_view term) const;

  // Descending score, ties by DocId. Documents matching no query term are
  // not returned.
  std::vector<std::pair<DocId, double>> retrieve(std::string_view query, std::size_t k) const;

 private:
  Bm25Params params_;
  std::vector<DocId> doc_ids_;
  std::unordered_map<DocId, std::size_t> doc_index_;
  std::vector<std::uint32_t> lengths_;
  double avg_length_ = 0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline std::vector<std::pair<DocId, double>> bm25_retrieve(const Bm25Index& index, std::string_view query,
                                                           std::size_t k) {
  return index.retrieve(query, k);
}

}  // namespace genret

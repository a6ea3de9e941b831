#include "genret/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "genret/errors.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

std::vector<std::string> index_terms(std::string_view text) {
  auto words = word_tokens(text);
  std::erase_if(words, [](const std::string& w) {
    return std::none_of(w.begin(), w.end(), [](char c) {
      auto u = static_cast<unsigned char>(c);
      return std::isalnum(u) || u >= 0x80;
    });
  });
  return words;
}

Bm25Index Bm25Index::build(const Corpus& corpus, const Bm25Params& params) {
  if (corpus.empty()) throw InvalidArgument("cannot index an empty corpus");
  Bm25Index index;
  index.params_ = params;
  double total = 0;
  corpus.for_each([&](const Document& d) {
    auto ord = static_cast<std::uint32_t>(index.doc_ids_.size());
    std::map<std::string, std::uint32_t> tf;
    std::uint32_t length = 0;
    for (const auto* field : {&d.title, &d.section, &d.body}) {
      for (auto& t : index_terms(*field)) {
        ++tf[std::move(t)];
        ++length;
      }
    }
    for (auto& [term, count] : tf) index.postings_[term].push_back({ord, count});
    index.doc_index_.emplace(d.doc_id, ord);
    index.doc_ids_.push_back(d.doc_id);
    index.lengths_.push_back(length);
    total += length;
  });
  index.avg_length_ = total / static_cast<double>(index.doc_ids_.size());
  return index;
}

std::optional<std::size_t> Bm25Index::doc_index(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const Posting> Bm25Index::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return {};
  return it->second;
}

double Bm25Index::idf(std::string_view term) const {
  const double n = static_cast<double>(doc_ids_.size());
  const double nt = static_cast<double>(postings(term).size());
  return std::log((n - nt + 0.5) / (nt + 0.5) + 1.0);
}

std::vector<std::pair<DocId, double>> Bm25Index::retrieve(std::string_view query, std::size_t k) const {
  std::unordered_map<std::uint32_t, double> scores;
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto& term : index_terms(query)) {
    auto list = postings(term);
    if (list.empty()) continue;
    const double w = idf(term);
    for (const auto& p : list) {
      const double tf = p.tf;
      const double norm = k1 * (1.0 - b + b * lengths_[p.doc] / avg_length_);
      scores[p.doc] += w * tf * (k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<std::pair<DocId, double>> out;
  out.reserve(scores.size());
  for (const auto& [doc, s] : scores) out.emplace_back(doc_ids_[doc], s);
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace genret

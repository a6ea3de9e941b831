#pragma once

// Fixture builders and brute-force oracles shared by the unit tests and the
// acceptance runner. Oracles here deliberately avoid the trie and the
// incremental constraint state.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "genret/constraints.hpp"
#include "genret/corpus.hpp"
#include "genret/decoder.hpp"
#include "genret/docid_trie.hpp"
#include "genret/language_model.hpp"
#include "genret/random.hpp"
#include "genret/vocabulary.hpp"

namespace genret::testing {

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words = {
      "alpha", "bravo", "charlie", "delta", "echo",   "foxtrot", "golf",  "hotel",
      "india", "juliet", "kilo",   "lima",  "mike",   "november", "oscar", "papa",
      "quebec", "romeo", "sierra", "tango", "uniform", "victor",  "whiskey", "xray"};
  return words;
}

inline std::string random_words(Rng& rng, std::size_t lo, std::size_t hi, std::size_t pool) {
  const auto& words = word_pool();
  pool = std::min(pool, words.size());
  auto n = lo + uniform_index(rng, hi - lo + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += words[uniform_index(rng, pool)];
  }
  return out;
}

// `n` documents with distinct (title, section) pairs drawn from a small
// word pool, so DocIds share long prefixes and some are prefixes of others.
inline std::vector<Document> random_documents(Rng& rng, std::size_t n, std::size_t pool = 6,
                                              std::size_t body_pool = 24) {
  std::vector<Document> docs;
  std::set<DocId> seen;
  while (docs.size() < n) {
    auto title = random_words(rng, 1, 2, pool);
    auto section = random_words(rng, 0, 2, pool);
    auto id = canonical_docid(title, section);
    if (!seen.insert(id).second) continue;
    std::string body;
    auto sentences = 1 + uniform_index(rng, 3);
    for (std::size_t s = 0; s < sentences; ++s) {
      if (!body.empty()) body += ' ';
      body += random_words(rng, 2, 6, body_pool) + ".";
    }
    docs.push_back(make_document(title, section, body));
  }
  return docs;
}

// Random token streams over the whole vocabulary, sprinkled with DocId
// spans so the model has opinions inside the trie.
inline std::vector<std::vector<TokenId>> random_texts(Rng& rng, const Vocabulary& vocab, const DocIdTrie& trie,
                                                      std::size_t count) {
  std::vector<std::vector<TokenId>> texts;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<TokenId> t;
    auto len = 3 + uniform_index(rng, 20);
    for (std::size_t j = 0; j < len; ++j) {
      if (!trie.empty() && uniform_index(rng, 4) == 0) {
        auto d = trie.doc_tokens(uniform_index(rng, trie.doc_count()));
        t.push_back(kDocIdOpen);
        t.insert(t.end(), d.begin(), d.end());
        t.push_back(kDocIdClose);
      } else {
        t.push_back(static_cast<TokenId>(uniform_index(rng, vocab.size())));
      }
    }
    texts.push_back(std::move(t));
  }
  return texts;
}

inline NgramOptions random_ngram_options(Rng& rng) {
  NgramOptions o;
  o.order = 1 + uniform_index(rng, 3);
  o.alpha = 0.01 + uniform_unit(rng);
  return o;
}

// DocIds (as token sequences) that can still be spelled after `prefix`
// given the already generated set, found by scanning every DocId.
struct OracleContinuations {
  std::set<TokenId> next;
  bool close = false;
};

inline OracleContinuations oracle_continuations(const std::vector<std::vector<TokenId>>& docs,
                                                const std::vector<bool>& excluded,
                                                const std::vector<TokenId>& prefix) {
  OracleContinuations out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (excluded[d]) continue;
    const auto& seq = docs[d];
    if (seq.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), seq.begin())) continue;
    if (seq.size() == prefix.size()) {
      out.close = true;
    } else {
      out.next.insert(seq[prefix.size()]);
    }
  }
  return out;
}

// Greedy DocId-list decoding recomputed from first principles: the allowed
// set at every step comes from scanning all DocIds, and the argmax reads
// the raw scorer output with the lowest id winning ties.
inline std::vector<DocId> oracle_docid_list(const LmScorer& lm, const Corpus& corpus, std::string_view query,
                                            std::size_t k) {
  const auto& vocab = lm.vocabulary();
  std::vector<std::vector<TokenId>> docs;
  for (const auto& id : corpus.doc_ids()) docs.push_back(vocab.encode(id));
  std::vector<bool> excluded(docs.size(), false);
  auto context = vocab.encode(std::string("retrieve: ") + std::string(query));
  std::vector<DocId> out;
  bool inside = false;
  std::vector<TokenId> prefix;

  auto argmax = [&](const std::set<TokenId>& allowed) {
    if (allowed.size() == 1) return *allowed.begin();
    auto lp = lm.next_logprobs(context);
    TokenId best = *allowed.begin();
    for (auto t : allowed) {
      if (lp[t] > lp[best]) best = t;
    }
    return best;
  };

  while (out.size() < k) {
    std::set<TokenId> allowed;
    if (!inside) {
      bool any = std::find(excluded.begin(), excluded.end(), false) != excluded.end();
      if (!any) break;
      allowed = {kDocIdOpen, kEos};
    } else {
      auto c = oracle_continuations(docs, excluded, prefix);
      allowed = c.next;
      if (c.close) allowed.insert(kDocIdClose);
    }
    auto tok = argmax(allowed);
    if (tok == kEos) break;
    context.push_back(tok);
    if (tok == kDocIdOpen) {
      inside = true;
      prefix.clear();
    } else if (tok == kDocIdClose) {
      inside = false;
      for (std::size_t d = 0; d < docs.size(); ++d) {
        if (docs[d] == prefix) {
          excluded[d] = true;
          out.push_back(corpus.doc_ids()[d]);
        }
      }
    } else {
      prefix.push_back(tok);
    }
  }
  return out;
}

// Every DocId spellable from the root under the exclusion set, by
// depth-first search over allowed_continuations.
inline std::set<DocId> spellable_docids(const DocIdTrie& trie, const ExclusionSet& excl) {
  std::set<DocId> out;
  std::vector<std::vector<TokenId>> stack{{}};
  while (!stack.empty()) {
    auto prefix = std::move(stack.back());
    stack.pop_back();
    auto c = allowed_continuations(trie, prefix, excl);
    if (c.close_permitted) {
      auto node = trie.walk(prefix);
      out.insert(trie.doc_ids()[static_cast<std::size_t>(trie.terminal_doc(*node))]);
    }
    for (auto t : c.tokens) {
      auto next = prefix;
      next.push_back(t);
      stack.push_back(std::move(next));
    }
  }
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("genret-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace genret::testing

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genret/constraints.hpp"
#include "genret/corpus.hpp"
#include "genret/docid_trie.hpp"
#include "genret/language_model.hpp"
#include "genret/prompts.hpp"

namespace genret {

struct RankedDocIds {
  std::vector<DocId> docids;
  // Summed, mask-renormalized log-probability of each "<docid> ... </docid>"
  // span, aligned with docids.
  std::vector<double> per_docid_logprob;
};

struct DecodeCost {
  std::size_t scorer_calls = 0;
  // Tokens appended to a model context: prompts, generated tokens, and
  // injected documents. A fresh session re-counts everything it re-reads.
  std::size_t context_tokens = 0;

  DecodeCost& operator+=(const DecodeCost& o) {
    scorer_calls += o.scorer_calls;
    context_tokens += o.context_tokens;
    return *this;
  }
};

struct RagOptions {
  std::size_t k_retrieve = 10;
  std::size_t k_context = 3;
  std::size_t document_budget = kDefaultDocumentBudget;
  std::size_t reference_cap = 64;  // content tokens per reference segment
  std::size_t answer_cap = 64;
};

struct RagResult {
  RankedDocIds docids;
  std::vector<DocId> context_docids;
  std::vector<std::string> references;
  std::string answer;
  // Everything after the prompt: DocId spans, injected documents,
  // reference segments, <answer> segment, <eos>.
  std::vector<TokenId> token_trace;
  DecodeCost decode_cost;
  bool empty_retrieval = false;
};

// One greedy generation session over a growing context. Ties go to the
// lowest token id; a position with a single allowed token is emitted
// without consulting the scorer.
class DecodeSession {
 public:
  DecodeSession(const LmScorer& lm, std::vector<TokenId> prompt);

  // Best allowed token and its log-probability renormalized over `allowed`
  // (ascending ids), without appending it.
  std::pair<TokenId, double> pick(std::span<const TokenId> allowed);
  // pick() followed by append().
  std::pair<TokenId, double> choose(std::span<const TokenId> allowed);
  void append(TokenId token);
  void inject(std::span<const TokenId> tokens);

  const LmScorer& lm() const { return *lm_; }
  std::span<const TokenId> context() const { return context_; }
  std::size_t prompt_size() const { return prompt_size_; }
  const DecodeCost& cost() const { return cost_; }

 private:
  const LmScorer* lm_;
  std::vector<TokenId> context_;
  std::size_t prompt_size_;
  DecodeCost cost_;
};

// Constrained greedy decoding of a ranked DocId list after the retrieval
// prompt. Stops after k DocIds, on <eos>, or when every DocId has been
// generated. Throws InvalidArgument for k == 0 or an empty trie.
RankedDocIds generate_docid_list(const LmScorer& lm, const DocIdTrie& trie, std::string_view query, std::size_t k);

// Same, continuing an existing session. The <eos> that ends a short list is
// not appended to the context.
RankedDocIds decode_docid_list(DecodeSession& session, const DocIdTrie& trie, std::size_t k);

// Unconstrained greedy decoding of an answer after the closed-book prompt
// ("answer: <query> <answer>"); returns the text generated before <eos>.
std::string generate_closed_book(const LmScorer& lm, std::string_view query, std::size_t max_tokens);

// Continuous DocIds -> references -> answer decoding in one session.
RagResult generate_rag(const LmScorer& lm, const DocIdTrie& trie, const Corpus& corpus, std::string_view query,
                       const RagOptions& options = {});

// Baseline that restarts from query + documents after retrieval.
RagResult generate_rag_pipeline(const LmScorer& lm, const DocIdTrie& trie, const Corpus& corpus,
                                std::string_view query, const RagOptions& options = {});

// Returns the tokens allowed after `history` (context plus the target
// prefix so far), ascending.
using MaskProvider = std::function<std::vector<TokenId>(std::span<const TokenId> history)>;

// Teacher-forced sum of log f(target_i | context, target_<i). With a mask
// provider, each step is renormalized over the allowed set. Throws
// InvalidArgument for an empty target and InvalidToken for bad ids.
double score_sequence(const LmScorer& lm, std::span<const TokenId> context, std::span<const TokenId> target,
                      const MaskProvider& mask = {});

// Whether a RAG token trace follows
//   (<docid> w+ </docid>)* w* (<ref> w* </ref>){refs} <answer> w* <eos>
// where w is any non-special token and refs == expected_references.
bool parse_rag_trace(std::span<const TokenId> trace, std::size_t expected_references);

}  // namespace genret

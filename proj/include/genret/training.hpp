#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genret/bm25.hpp"
#include "genret/corpus.hpp"
#include "genret/language_model.hpp"
#include "genret/random.hpp"

namespace genret {

enum class Task {
  kRetrieval,
  kClosedBook,
  kRagReference,
  kRagAnswer,
  kAuxQuery2DocIds,
  kAuxSummary2DocIds,
  kAuxDocId2Summary,
  kAuxDocId2Related,
};

std::string_view task_name(Task task);
// Throws InvalidArgument for an unknown name.
Task parse_task(std::string_view name);
bool is_aux(Task task);

struct TrainingExample {
  Task task = Task::kRetrieval;
  std::string input;
  std::string target;
  bool noise_flag = false;

  bool operator==(const TrainingExample&) const = default;
};

// Line-delimited {"task","input","target","noise_flag"} records. An
// optional leading {"run_config": ...} line is written / skipped.
void write_examples(std::ostream& out, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_examples(std::istream& in);

// Reorders BM25 candidates for a query.
class Reranker {
 public:
  virtual ~Reranker() = default;
  virtual std::vector<DocId> rerank(std::string_view query, std::span<const DocId> candidates) const = 0;
};

// Orders candidates by the number of distinct query terms found in the
// document's title, section and body; stable, so ties keep BM25 order.
class OverlapReranker final : public Reranker {
 public:
  explicit OverlapReranker(const Corpus& corpus) : corpus_(&corpus) {}
  std::vector<DocId> rerank(std::string_view query, std::span<const DocId> candidates) const override;

 private:
  const Corpus* corpus_;
};

// labeled ++ (reranked minus labeled and duplicates), cut to k.
std::vector<DocId> merge_ranked(std::span<const DocId> labeled, std::span<const DocId> reranked, std::size_t k);

inline constexpr std::size_t kDefaultCandidateCount = 100;

// Ranking-oriented target list: BM25 top `candidates`, reranked, appended
// to the labeled DocIds. Throws NotFound for a labeled DocId outside the
// index.
std::vector<DocId> construct_ranked_docid_list(std::string_view query, std::span<const DocId> labeled,
                                               const Bm25Index& index, const Reranker& reranker, std::size_t k,
                                               std::size_t candidates = kDefaultCandidateCount);

TrainingExample make_retrieval_example(std::string_view query, std::span<const DocId> docids);
TrainingExample make_closed_book_example(std::string_view query, std::string_view answer);

// The RagReference example and the RagAnswer example for one query. With
// probability tau the answer example's reference is replaced by a uniformly
// drawn sentence of the context documents and noise_flag is set. Throws
// InvalidArgument for tau outside [0, 1] or tau > 0 without sentences.
std::vector<TrainingExample> make_rag_examples(std::string_view query, std::span<const Document> context_docs,
                                               std::string_view gold_reference, std::string_view gold_answer,
                                               double tau, Rng& rng,
                                               std::size_t document_budget = 256);

// First context sentence containing an answer; otherwise the sentence with
// the most answer tokens. Empty when there are no sentences.
std::string extract_reference(std::span<const Document> docs, std::span<const std::string> answers);

const std::vector<std::string>& stopwords();
// Index terms of text with stopwords removed, joined by spaces.
std::string strip_stopwords(std::string_view text);

struct AuxOptions {
  std::size_t per_task_count = 100;
  std::size_t list_length = 10;
  std::size_t candidates = kDefaultCandidateCount;
};

// The four DocId-understanding tasks, per_task_count sampled documents
// each: pseudo query -> DocIds, summary -> DocIds, DocId -> summary, DocId
// -> related DocIds. Documents without sentences (or without neighbours,
// for the related task) are skipped with a warning.
std::vector<TrainingExample> make_docid_understanding_examples(const Corpus& corpus, const Bm25Index& index,
                                                               const Reranker& reranker, const AuxOptions& options,
                                                               Rng& rng);

// Teacher-forced negative log-likelihood of target ++ <eos> after input.
double sequence_loss(const LmScorer& lm, const TrainingExample& example);

struct LossWeights {
  double rank = 1;
  double gen = 1;
  double rag = 1;
  double aux = 1;
};

struct LossBreakdown {
  double l_rank = 0;
  double l_gen = 0;
  double l_ref = 0;
  double l_ans = 0;
  double l_rag = 0;
  double l_aux = 0;
  double combined = 0;
};

// Sums sequence losses per task. Clean RagAnswer examples count fully and
// noise-flagged ones with weight tau; l_rag = l_ref + l_ans and combined is
// the weighted sum of l_rank, l_gen, l_rag and l_aux.
LossBreakdown combined_loss(const LmScorer& lm, std::span<const TrainingExample> batch,
                            const LossWeights& weights = {}, double tau = 0.2);

// Pure recombination of the four component losses.
double combine(const LossWeights& weights, double l_rank, double l_gen, double l_rag, double l_aux);

}  // namespace genret
